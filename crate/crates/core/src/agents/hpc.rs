use super::requirement::HpcConfig;
use super::AgentError;
use crate::case::{upsert_file, CaseState, FoamFile};
use crate::foam::{parse, serialize, Dictionary, DictionaryTree, Entry, FoamHeader, Item};

/// Scheduler directives some clusters require, used when none are given.
const CLUSTER_PRESETS: &[(&str, &[&str])] = &[("perlmutter", &["-C cpu", "-q regular"])];

fn subdomains(state: &CaseState) -> Option<u32> {
    let f = state.file("system", "decomposeParDict")?;
    parse(&f.content, None).ok()?.body.get_word("numberOfSubdomains")?.parse().ok()
}

fn word(w: &str) -> Vec<Item> {
    vec![Item::Word(w.to_string())]
}

/// Sets `numberOfSubdomains`; geometric methods whose split no longer
/// matches are switched to `scotch`.
fn decompose_dict(existing: Option<&FoamFile>, tasks: u32) -> String {
    let parsed = existing.and_then(|f| parse(&f.content, None).ok());
    let mut tree = parsed.unwrap_or_else(|| DictionaryTree {
        header: Some(FoamHeader::new("dictionary", Some("system"), "decomposeParDict")),
        body: Dictionary::default(),
    });
    tree.body.set_value("numberOfSubdomains", vec![Item::Number(tasks.to_string())]);
    let method = tree.body.get_word("method").map(str::to_string);
    let keep = match method.as_deref() {
        Some("simple") | Some("hierarchical") => {
            let coeffs = tree.body.get_dict(&format!("{}Coeffs", method.as_deref().unwrap_or_default()))
                .or_else(|| tree.body.get_dict("coeffs"));
            let product: Option<u64> = coeffs.and_then(|c| c.get_items("n")).and_then(|items| match items.first() {
                Some(Item::List(l)) => l.iter().map(|i| i.as_number().map(|x| x as u64)).product(),
                _ => None,
            });
            product == Some(tasks as u64)
        }
        Some(_) => true,
        None => false,
    };
    if !keep {
        tree.body.set_value("method", word("scotch"));
    }
    if !tree.body.entries.iter().any(|e| matches!(e, Entry::Value { key, .. } if key == "method")) {
        tree.body.set_value("method", word("scotch"));
    }
    serialize(&tree)
}

/// Renders the batch script. `case_path` is where the job changes directory to.
pub fn render_slurm_script(cfg: &HpcConfig, tasks: u32, case_path: &str) -> String {
    let nodes = cfg.nodes.max(1);
    let per_node = tasks.div_ceil(nodes);
    let mut hints: Vec<String> = cfg.partition_hints.clone();
    if hints.is_empty() {
        if let Some((_, preset)) = CLUSTER_PRESETS.iter().find(|(n, _)| n.eq_ignore_ascii_case(&cfg.cluster_name)) {
            hints = preset.iter().map(|s| s.to_string()).collect();
        }
    }
    let mut s = String::from("#!/bin/bash\n");
    s.push_str(&format!("#SBATCH -A {}\n", cfg.account));
    for h in &hints {
        s.push_str(&format!("#SBATCH {h}\n"));
    }
    s.push_str(&format!("#SBATCH -N {nodes}\n#SBATCH -n {tasks}\n#SBATCH --ntasks-per-node={per_node}\n"));
    s.push_str(&format!("#SBATCH -t {}\n", cfg.walltime));
    if let Some(m) = &cfg.memory {
        s.push_str(&format!("#SBATCH --mem={m}\n"));
    }
    s.push_str(&format!("#SBATCH -J {}\n#SBATCH -o %j.out\n#SBATCH -e %j.err\n\n", cfg.job_name));
    s.push_str("# Initialize error handling\nset -e\n\n");
    for m in &cfg.modules {
        s.push_str(&format!("module load {m}\n"));
    }
    if !cfg.modules.is_empty() {
        s.push('\n');
    }
    s.push_str(&format!("# Change to case directory\ncd {case_path} || exit 1\n\n"));
    s.push_str("# Create log directory if it doesn't exist\nmkdir -p logs\n\n");
    let invocation = if tasks > 1 { "./Allrun -parallel" } else { "./Allrun" };
    s.push_str(&format!(
        "# Run the simulation\necho \"Starting OpenFOAM simulation at $(date)\"\nif {invocation}; then\n    echo \"Simulation completed successfully at $(date)\"\n    exit 0\nelse\n    echo \"Simulation failed at $(date)\"\n    exit 1\nfi\n"
    ));
    s
}

/// Builds the batch script for the case and makes the case's domain
/// decomposition match the task count. The script is kept on the state.
pub fn generate_hpc_script(state: &mut CaseState, cfg: &HpcConfig, case_path: &str) -> Result<String, AgentError> {
    if cfg.account.trim().is_empty() {
        return Err(AgentError::MissingAccount);
    }
    let tasks = cfg.tasks.or_else(|| subdomains(state)).unwrap_or(1).max(1);
    if tasks > 1 || state.file("system", "decomposeParDict").is_some() {
        let text = decompose_dict(state.file("system", "decomposeParDict"), tasks);
        upsert_file(&mut state.foamfiles, FoamFile::new("system", "decomposeParDict", text));
    }
    let script = render_slurm_script(cfg, tasks, case_path);
    state.hpc_script = Some(script.clone());
    Ok(script)
}
