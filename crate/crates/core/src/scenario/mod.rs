//! Scripted cases for engine tests and the ablation bench.
//!
//! [`ScenarioProvider`] stands in for the model: it answers each prompt by
//! template, returning a lid-driven cavity case with a chosen number of
//! seeded boundary-patch faults and corrections that remove them one per
//! review. [`SimulatedFoam`] stands in for OpenFOAM: it lints the case
//! written to disk and fails with OpenFOAM-style fatal errors while any
//! finding remains. Repairs therefore only succeed when the corrections
//! really fix the files.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::case::{CaseDescriptor, FoamFile, VocabularySets};
use crate::config::Config;
use crate::exec::{ExecError, ExecutionResult, Executor};
use crate::foam::{lint_case, parse};
use crate::index::{build_index_set, render_tree, CaseRecord, IndexError, IndexSet};
use crate::llm::{count_tokens, CompletionRequest, CompletionResult, Embedder, HashEmbedder, LlmError, Provider};
use crate::prompts::PromptLibrary;
use crate::workflow::{run_workflow, WorkflowDeps, WorkflowError, WorkflowOutcome};

pub const CAVITY_REQUIREMENT: &str =
    "Do a lid-driven cavity flow simulation. The top wall moves at 1 m/s. Use icoFoam with endTime 0.5.";
pub const VISUALIZATION_SENTENCE: &str = " Visualize the velocity ('U') at the latest time.";
pub const CAVITY_CASE_ID: &str = "incompressible/icoFoam/cavity";

const CLASSIFICATION: &str =
    r#"{"case_name":"cavity","case_domain":"incompressible","case_category":"None","case_solver":"icoFoam"}"#;

const ALLRUN: &str = "#!/bin/sh\ncd \"${0%/*}\" || exit 1\n. \"$WM_PROJECT_DIR/bin/tools/RunFunctions\"\n\nrunApplication blockMesh\nrunApplication icoFoam\n";

const CAVITY_FILES: [(&str, &str, &str); 7] = [
    ("0", "U", include_str!("../../data/scenario/cavity/0/U")),
    ("0", "p", include_str!("../../data/scenario/cavity/0/p")),
    ("constant", "transportProperties", include_str!("../../data/scenario/cavity/constant/transportProperties")),
    ("system", "blockMeshDict", include_str!("../../data/scenario/cavity/system/blockMeshDict")),
    ("system", "controlDict", include_str!("../../data/scenario/cavity/system/controlDict")),
    ("system", "fvSchemes", include_str!("../../data/scenario/cavity/system/fvSchemes")),
    ("system", "fvSolution", include_str!("../../data/scenario/cavity/system/fvSolution")),
];

/// Seedable faults, in the order corrections remove them: a patch of a
/// field file renamed so it no longer matches the mesh.
const PATCH_FAULTS: [(&str, &str); 6] = [
    ("0/U", "movingWall"),
    ("0/p", "movingWall"),
    ("0/U", "fixedWalls"),
    ("0/p", "fixedWalls"),
    ("0/U", "frontAndBack"),
    ("0/p", "frontAndBack"),
];
pub const MAX_FAULTS: u32 = PATCH_FAULTS.len() as u32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualizationPlan {
    /// The requirement asks for no image.
    #[default]
    None,
    Succeeds,
    /// The first script raises; the regenerated one works.
    FailsOnce,
    AlwaysFails,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// Seeded patch faults, at most [`MAX_FAULTS`].
    #[serde(default)]
    pub faults: u32,
    /// When false every correction edits an unrelated value and the faults stay.
    #[serde(default = "yes")]
    pub fixable: bool,
    #[serde(default)]
    pub visualization: VisualizationPlan,
    /// The planner returns no files.
    #[serde(default)]
    pub empty_plan: bool,
    #[serde(default)]
    pub max_loops: Option<u32>,
    #[serde(default)]
    pub reviewer_enabled: Option<bool>,
}

impl ScenarioSpec {
    pub fn new(name: &str) -> Self {
        ScenarioSpec {
            name: name.to_string(),
            faults: 0,
            fixable: true,
            visualization: VisualizationPlan::None,
            empty_plan: false,
            max_loops: None,
            reviewer_enabled: None,
        }
    }

    pub fn with_faults(mut self, n: u32) -> Self {
        self.faults = n;
        self
    }

    pub fn unfixable(mut self) -> Self {
        self.fixable = false;
        self
    }

    pub fn with_visualization(mut self, v: VisualizationPlan) -> Self {
        self.visualization = v;
        self
    }

    pub fn requirement(&self) -> String {
        let mut r = CAVITY_REQUIREMENT.to_string();
        if self.visualization != VisualizationPlan::None {
            r.push_str(VISUALIZATION_SENTENCE);
        }
        r
    }

    /// `base` with this scenario's overrides applied.
    pub fn config(&self, base: &Config) -> Config {
        let mut c = base.clone();
        if let Some(m) = self.max_loops {
            c.max_loops = m;
        }
        if let Some(r) = self.reviewer_enabled {
            c.reviewer_enabled = r;
        }
        c
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.faults > MAX_FAULTS {
            return Err(format!("scenario {}: at most {MAX_FAULTS} faults", self.name));
        }
        if !crate::case::is_filesystem_safe(&self.name) {
            return Err(format!("scenario name '{}' is not usable as a directory name", self.name));
        }
        Ok(())
    }

    pub fn provider(&self) -> ScenarioProvider {
        ScenarioProvider::new(self.clone())
    }
}

/// A list of scenarios, as read from a suite file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub cases: Vec<ScenarioSpec>,
}

impl Suite {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let s: Suite = serde_json::from_str(text).map_err(|e| e.to_string())?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let s: Suite = toml::from_str(text).map_err(|e| e.to_string())?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cases.is_empty() {
            return Err("suite has no cases".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.cases {
            c.validate()?;
            if !seen.insert(&c.name) {
                return Err(format!("duplicate scenario name {}", c.name));
            }
        }
        Ok(())
    }

    /// Eight cases, six of which fail their first run and need repair.
    pub fn repair() -> Self {
        Suite {
            cases: vec![
                ScenarioSpec::new("clean"),
                ScenarioSpec::new("clean-plot").with_visualization(VisualizationPlan::Succeeds),
                ScenarioSpec::new("one-fault").with_faults(1),
                ScenarioSpec::new("one-fault-plot").with_faults(1).with_visualization(VisualizationPlan::FailsOnce),
                ScenarioSpec::new("two-faults").with_faults(2),
                ScenarioSpec::new("three-faults").with_faults(3),
                ScenarioSpec::new("five-faults").with_faults(5),
                ScenarioSpec::new("stubborn").with_faults(1).unfixable(),
            ],
        }
    }
}

fn patch_line(patch: &str) -> Regex {
    Regex::new(&format!(r"(?m)^(\s*){patch}[ \t]*$")).expect("patch regex")
}

/// The misspelling used for a seeded fault: the patch name minus its last letter.
pub fn misspelt(patch: &str) -> String {
    patch[..patch.len() - 1].to_string()
}

/// A cavity file with the given seeded faults applied.
pub fn cavity_file(id: &str, faults: impl IntoIterator<Item = usize>) -> Option<String> {
    let (_, _, base) = CAVITY_FILES.iter().find(|(d, f, _)| crate::case::file_id(d, f) == id)?;
    let mut text = base.to_string();
    for i in faults {
        let (file, patch) = PATCH_FAULTS[i];
        if file == id {
            text = patch_line(patch).replace(&text, format!("${{1}}{}", misspelt(patch))).into_owned();
        }
    }
    Some(text)
}

pub fn cavity_descriptor() -> CaseDescriptor {
    CaseDescriptor {
        case_name: "cavity".into(),
        case_domain: "incompressible".into(),
        case_category: "None".into(),
        case_solver: "icoFoam".into(),
    }
}

/// The clean cavity case as a one-case knowledge base.
pub fn cavity_record() -> CaseRecord {
    let mut file_contents: BTreeMap<String, String> =
        CAVITY_FILES.iter().map(|(d, f, c)| (crate::case::file_id(d, f), c.to_string())).collect();
    file_contents.insert("Allrun".into(), ALLRUN.into());
    CaseRecord {
        case_id: CAVITY_CASE_ID.into(),
        metadata: cavity_descriptor(),
        directory_structure: render_tree("cavity", file_contents.keys().map(String::as_str)),
        file_contents,
        execution_script: ALLRUN.into(),
    }
}

pub fn scenario_indices(dim: usize) -> Result<IndexSet, IndexError> {
    build_index_set(&[cavity_record()], &HashEmbedder::new(dim), dim)
}

fn capture<'t>(re: &'static OnceLock<Regex>, pattern: &str, text: &'t str) -> Option<&'t str> {
    re.get_or_init(|| Regex::new(pattern).expect("static regex")).captures(text).and_then(|c| c.get(1)).map(|m| m.as_str())
}

fn good_plot_script(output: &str) -> String {
    format!(
        "```python\nimport pyvista as pv\n\npv.OFF_SCREEN = True\nopen('case.foam', 'a').close()\nreader = pv.OpenFOAMReader('case.foam')\nreader.set_active_time_value(reader.time_values[-1])\nmesh = reader.read()['internalMesh']\nplotter = pv.Plotter(off_screen=True)\nplotter.add_mesh(mesh, scalars='U')\nplotter.screenshot('{output}')\n```"
    )
}

const BAD_PLOT_SCRIPT: &str = "import pyvista as pv\nraise RuntimeError('no render window available')\n";

/// Answers prompts for one scenario. Counters are per template, so the
/// answers do not depend on which optional stages run.
pub struct ScenarioProvider {
    spec: ScenarioSpec,
    calls: Mutex<BTreeMap<String, usize>>,
    embedder: HashEmbedder,
}

impl ScenarioProvider {
    pub fn new(spec: ScenarioSpec) -> Self {
        Self::with_dim(spec, Config::default().embedding_dim)
    }

    pub fn with_dim(spec: ScenarioSpec, dim: usize) -> Self {
        ScenarioProvider { spec, calls: Mutex::new(BTreeMap::new()), embedder: HashEmbedder::new(dim) }
    }

    fn next(&self, key: &str) -> usize {
        let mut calls = self.calls.lock().expect("call counters");
        let n = calls.entry(key.to_string()).or_default();
        *n += 1;
        *n - 1
    }

    fn all_faults(&self) -> std::ops::Range<usize> {
        0..self.spec.faults as usize
    }

    fn correction(&self, n: usize) -> String {
        let k = self.spec.faults as usize;
        let (folder, file, content) = if self.spec.fixable && n < k {
            let id = PATCH_FAULTS[n].0;
            let (folder, file) = id.split_once('/').expect("field id");
            (folder.to_string(), file.to_string(), cavity_file(id, n + 1..k).expect("known file"))
        } else {
            let control = cavity_file("system/controlDict", []).expect("controlDict");
            let dt = format!("deltaT          {};", 0.005 / (n as f64 + 2.0));
            ("system".into(), "controlDict".into(), control.replace("deltaT          0.005;", &dt))
        };
        serde_json::json!([{ "file_name": file, "folder_name": folder, "content": content }]).to_string()
    }

    fn answer(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        static FILE: OnceLock<Regex> = OnceLock::new();
        static FOLDER: OnceLock<Regex> = OnceLock::new();
        static PNG: OnceLock<Regex> = OnceLock::new();
        let n = self.next(&req.template_id);
        Ok(match req.template_id.as_str() {
            "case_description" => CLASSIFICATION.to_string(),
            "task_decomposition" => {
                let subtasks: Vec<_> = if self.spec.empty_plan {
                    Vec::new()
                } else {
                    CAVITY_FILES.iter().map(|(d, f, _)| serde_json::json!({ "file_name": f, "folder_name": d })).collect()
                };
                serde_json::json!({ "subtasks": subtasks }).to_string()
            }
            "file_generation" => {
                let file = capture(&FILE, r"<file_name>([^<]*)</file_name>", &req.system_prompt).unwrap_or_default();
                let folder = capture(&FOLDER, r"<folder_name>([^<]*)</folder_name>", &req.system_prompt).unwrap_or_default();
                let id = crate::case::file_id(folder, file);
                let text = cavity_file(&id, self.all_faults())
                    .ok_or_else(|| LlmError::ProviderFailure(format!("scenario has no file {id}")))?;
                format!("```\n{text}```")
            }
            "command_generation" => r#"["blockMesh", "icoFoam"]"#.to_string(),
            "allrun_generation" => format!("```bash\n{ALLRUN}```"),
            "error_analysis_initial" | "error_analysis_subsequent" => {
                let review = self.next("review_analysis") + 1;
                format!(
                    "Review {review}: a boundary patch in the initial field files does not match any patch of the mesh in system/blockMeshDict. Rename the field entry to the mesh patch name."
                )
            }
            "file_correction" => self.correction(n),
            "visualization" => {
                let output = capture(&PNG, r"named (\S+?\.png)", &req.system_prompt).unwrap_or("image.png");
                let broken = match self.spec.visualization {
                    VisualizationPlan::AlwaysFails => true,
                    VisualizationPlan::FailsOnce => n == 0,
                    _ => false,
                };
                if broken { BAD_PLOT_SCRIPT.to_string() } else { good_plot_script(output) }
            }
            "gmsh_script" => "import gmsh\ngmsh.initialize()\ngmsh.write('mesh.msh')\ngmsh.finalize()\n".to_string(),
            other => return Err(LlmError::ProviderFailure(format!("scenario cannot answer template {other}"))),
        })
    }
}

impl Embedder for ScenarioProvider {
    fn embed(&self, text: &str) -> Result<Vec<f32>, LlmError> {
        self.embedder.embed(text)
    }
}

impl Provider for ScenarioProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let text = self.answer(req)?;
        Ok(CompletionResult {
            prompt_tokens: count_tokens(&req.system_prompt) + count_tokens(&req.user_prompt),
            completion_tokens: count_tokens(&text),
            text,
        })
    }
}

/// A stand-in for an OpenFOAM installation. `run` lints the case on disk
/// and reports each finding as a fatal error in the solver log; a clean
/// case succeeds. `run_script` fails scripts that raise and otherwise
/// writes the `.png` file the script names.
#[derive(Debug, Clone, Default)]
pub struct SimulatedFoam;

const PNG_BYTES: &[u8] = &[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];
const BANNER: &str = "/*---------------------------------------------------------------------------*\\\n  =========                 |\n  \\\\      /  F ield         | OpenFOAM: The Open Source CFD Toolbox\n\\*---------------------------------------------------------------------------*/\n";

fn read_case(case_dir: &Path) -> Result<Vec<FoamFile>, ExecError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(case_dir).sort_by_file_name() {
        let entry = entry.map_err(|e| ExecError::Io { path: case_dir.display().to_string(), message: e.to_string() })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(case_dir).expect("walk stays inside the case");
        let rel = rel.to_string_lossy().replace('\\', "/");
        if rel.starts_with("logs/") || rel.starts_with("log.") || rel.ends_with(".png") {
            continue;
        }
        let (folder, file) = rel.rsplit_once('/').unwrap_or(("", &rel));
        let content = String::from_utf8_lossy(&std::fs::read(entry.path()).map_err(|e| ExecError::io(entry.path(), e))?).into_owned();
        files.push(FoamFile::new(folder, file, content));
    }
    Ok(files)
}

fn fatal_block(message: &str, file: &str) -> String {
    format!("--> FOAM FATAL IO ERROR:\n{message}\n\nfile: {file} at line 1.\n\n    From function simulated case check\n\nFOAM exiting\n\n")
}

impl Executor for SimulatedFoam {
    fn prepare(&self, case_dir: &Path) -> Result<(), ExecError> {
        let logs = case_dir.join("logs");
        if logs.is_dir() {
            std::fs::remove_dir_all(&logs).map_err(|e| ExecError::io(&logs, e))?;
        }
        Ok(())
    }

    fn run(&self, case_dir: &Path) -> Result<ExecutionResult, ExecError> {
        let files = read_case(case_dir)?;
        if !files.iter().any(|f| f.id() == "Allrun") {
            return Err(ExecError::SpawnFailure(format!("{}/Allrun does not exist", case_dir.display())));
        }
        let solver = files
            .iter()
            .find(|f| f.id() == "system/controlDict")
            .and_then(|f| parse(&f.content, None).ok())
            .and_then(|t| t.body.get_word("application").map(str::to_string))
            .unwrap_or_else(|| "icoFoam".into());
        let descriptor = CaseDescriptor { case_solver: solver.clone(), ..cavity_descriptor() };
        let report = lint_case(&files, Some(&descriptor));

        let mut logs = BTreeMap::new();
        logs.insert("log.blockMesh".to_string(), format!("{BANNER}Creating block mesh topology\nWriting polyMesh\nEnd\n"));
        let mut solver_log = format!("{BANNER}Create time\n\nCreate mesh for time = 0\n\n");
        for p in &report.parse_errors {
            solver_log.push_str(&fatal_block(&p.error.to_string(), &p.file));
        }
        for i in &report.inconsistencies {
            solver_log.push_str(&fatal_block(&i.detail, i.files.first().map(String::as_str).unwrap_or("case")));
        }
        let code = if report.is_clean() {
            solver_log.push_str("Time = 0.5\n\nEnd\n");
            0
        } else {
            1
        };
        logs.insert(format!("log.{solver}"), solver_log);
        Ok(ExecutionResult::from_parts(logs, BTreeMap::from([("Allrun".to_string(), code)])))
    }

    fn run_script(&self, case_dir: &Path, script: &str) -> Result<ExecutionResult, ExecError> {
        static PNG: OnceLock<Regex> = OnceLock::new();
        let path = case_dir.join(script);
        let text = std::fs::read_to_string(&path).map_err(|e| ExecError::io(&path, e))?;
        let mut logs = BTreeMap::new();
        if let Some(line) = text.lines().find(|l| l.trim_start().starts_with("raise ")) {
            let error = line.trim_start().trim_start_matches("raise ").replace("('", ": ").replace("')", "");
            logs.insert(
                "stderr".to_string(),
                format!("Traceback (most recent call last):\n  File \"{script}\", line 2, in <module>\n    {}\n{error}\n", line.trim()),
            );
            return Ok(ExecutionResult::from_parts(logs, BTreeMap::from([(script.to_string(), 1)])));
        }
        if let Some(name) = capture(&PNG, r#"['"]([\w.\-]+\.png)['"]"#, &text) {
            let out = case_dir.join(name);
            std::fs::write(&out, PNG_BYTES).map_err(|e| ExecError::io(&out, e))?;
        }
        Ok(ExecutionResult::from_parts(logs, BTreeMap::from([(script.to_string(), 0)])))
    }
}

/// Shared read-only inputs for running scenarios.
pub struct ScenarioKit {
    pub indices: IndexSet,
    pub prompts: PromptLibrary,
    pub vocab: VocabularySets,
}

impl ScenarioKit {
    pub fn new(dim: usize) -> Result<Self, IndexError> {
        Ok(ScenarioKit { indices: scenario_indices(dim)?, prompts: PromptLibrary::bundled(), vocab: VocabularySets::bundled() })
    }

    /// Runs one scenario through the full workflow under `workdir/<name>/`.
    pub fn run(&self, spec: &ScenarioSpec, base: &Config, workdir: &Path) -> Result<WorkflowOutcome, WorkflowError> {
        let config = spec.config(base);
        let provider = ScenarioProvider::with_dim(spec.clone(), self.indices.dim());
        let deps = WorkflowDeps {
            provider: &provider,
            executor: &SimulatedFoam,
            indices: &self.indices,
            prompts: &self.prompts,
            vocab: &self.vocab,
            commands: None,
            workdir: workdir.to_path_buf(),
        };
        run_workflow(&spec.name, &spec.requirement(), &[], &config, &deps)
    }
}

/// Tool-service inputs that answer with `spec` and run cases on [`SimulatedFoam`].
pub fn service_deps(spec: &ScenarioSpec, config: Config, workdir: &Path) -> Result<crate::mcp::ServiceDeps, IndexError> {
    let indices = scenario_indices(config.embedding_dim)?;
    Ok(crate::mcp::ServiceDeps {
        provider: std::sync::Arc::new(ScenarioProvider::with_dim(spec.clone(), indices.dim())),
        executor: std::sync::Arc::new(SimulatedFoam),
        submitter: None,
        indices: std::sync::Arc::new(indices),
        prompts: std::sync::Arc::new(PromptLibrary::bundled()),
        vocab: std::sync::Arc::new(VocabularySets::bundled()),
        config: spec.config(&config),
        workdir: workdir.to_path_buf(),
        hpc_poll_interval: std::time::Duration::from_millis(10),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_faults_change_only_their_file() {
        let clean = cavity_file("0/U", []).unwrap();
        let one = cavity_file("0/U", [0]).unwrap();
        assert!(one.contains("    movingWal\n") && !one.contains("movingWall"));
        assert_eq!(cavity_file("0/p", [0]).unwrap(), cavity_file("0/p", []).unwrap());
        assert_ne!(clean, one);
        assert!(cavity_file("0/T", []).is_none());
    }

    #[test]
    fn suite_files_validate() {
        assert!(Suite::repair().validate().is_ok());
        assert!(Suite::from_json(r#"{"cases":[{"name":"a","faults":9}]}"#).is_err());
        assert!(Suite::from_json(r#"{"cases":[{"name":"a"},{"name":"a"}]}"#).is_err());
        let s = Suite::from_toml("[[cases]]\nname = \"x\"\nfaults = 2\nfixable = false\n").unwrap();
        assert_eq!(s.cases[0], ScenarioSpec::new("x").with_faults(2).unfixable());
    }

    #[test]
    fn simulated_solver_flags_each_seeded_fault() {
        let dir = tempfile::tempdir().unwrap();
        for (d, f, _) in CAVITY_FILES {
            let id = crate::case::file_id(d, f);
            let p = dir.path().join(&id);
            std::fs::create_dir_all(p.parent().unwrap()).unwrap();
            std::fs::write(p, cavity_file(&id, 0..3).unwrap()).unwrap();
        }
        std::fs::write(dir.path().join("Allrun"), ALLRUN).unwrap();
        let r = SimulatedFoam.run(dir.path()).unwrap();
        assert!(!r.is_success());
        let fatals = crate::exec::extract_errors(&r);
        // Each renamed patch is both an unknown field patch and an uncovered mesh patch.
        assert_eq!(fatals.len(), 6, "{fatals:?}");

        for (d, f, _) in CAVITY_FILES {
            let id = crate::case::file_id(d, f);
            std::fs::write(dir.path().join(&id), cavity_file(&id, []).unwrap()).unwrap();
        }
        assert!(SimulatedFoam.run(dir.path()).unwrap().is_success());
    }
}
