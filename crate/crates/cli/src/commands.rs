use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use foamforge_core::ablation::{config_matrix, run_bench, to_csv, Toggle};
use foamforge_core::case::{case_dir, is_filesystem_safe};
use foamforge_core::exec::{LocalExecutor, Submitter, SlurmSubmitter, REAL_EXEC_ENV};
use foamforge_core::index::{build_index_set, ingest_corpus, IndexKind};
#[cfg(feature = "http")]
use foamforge_core::llm::Embedder;
use foamforge_core::llm::HashEmbedder;
use foamforge_core::mcp::{serve_listener, serve_stream};
use foamforge_core::scenario::{
    scenario_indices, ScenarioKit, ScenarioProvider, ScenarioSpec, SimulatedFoam, Suite,
};
use foamforge_core::{
    run_workflow, CaseState, Config, Executor, IndexSet, JobMode, McpService, PromptLibrary, Provider, RunStatus,
    ServiceDeps, VocabularySets, WorkflowDeps,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::settings::{resolve, ConfigArgs, PathArgs, Resolved};
use crate::{BenchArgs, EmbedderChoice, ExecutorChoice, IndexCommand, RunArgs, ServeArgs, UsageError, EXIT_FAILURE};

/// Written next to a saved index so later runs embed queries the same way.
const EMBEDDER_MARKER: &str = "embedder.json";

#[derive(Debug, Serialize, Deserialize)]
struct EmbedderMarker {
    kind: String,
    #[serde(default)]
    model: Option<String>,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_suite(path: &Path) -> anyhow::Result<Suite> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read suite {}: {e}", path.display())))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => Suite::from_toml(&text),
        _ => Suite::from_json(&text),
    };
    parsed.map_err(|e| usage(format!("suite {}: {e}", path.display())))
}

fn find_scenario(name: &str, suite: Option<&Path>) -> anyhow::Result<ScenarioSpec> {
    let suite = match suite {
        Some(p) => load_suite(p)?,
        None => Suite::repair(),
    };
    let names: Vec<&str> = suite.cases.iter().map(|c| c.name.as_str()).collect();
    suite
        .cases
        .iter()
        .find(|c| c.name == name)
        .cloned()
        .ok_or_else(|| usage(format!("unknown scenario '{name}' (available: {})", names.join(", "))))
}

fn prompts(resolved: &Resolved) -> anyhow::Result<PromptLibrary> {
    match &resolved.prompts {
        Some(dir) => Ok(PromptLibrary::with_overrides(dir)?),
        None => Ok(PromptLibrary::bundled()),
    }
}

fn load_index(dir: &Path) -> anyhow::Result<(IndexSet, Option<EmbedderMarker>)> {
    let set = IndexSet::load(dir).map_err(|e| usage(format!("cannot load index {}: {e}", dir.display())))?;
    let marker = std::fs::read_to_string(dir.join(EMBEDDER_MARKER)).ok().and_then(|t| serde_json::from_str(&t).ok());
    Ok((set, marker))
}

fn executor(choice: ExecutorChoice, config: &Config) -> anyhow::Result<Arc<dyn Executor>> {
    match choice {
        ExecutorChoice::Simulated => Ok(Arc::new(SimulatedFoam)),
        ExecutorChoice::Local => {
            let local = LocalExecutor::from_env(Duration::from_secs(config.exec_timeout_secs));
            if !local.is_enabled() {
                bail!(UsageError(format!(
                    "local execution needs an OpenFOAM install and {REAL_EXEC_ENV}=1 (or pass --executor simulated)"
                )));
            }
            Ok(Arc::new(local))
        }
    }
}

/// Completions from the HTTP endpoint; query embeddings from whatever built the index.
#[cfg(feature = "http")]
struct LiveProvider {
    chat: foamforge_core::llm::HttpProvider,
    hash: Option<HashEmbedder>,
}

#[cfg(feature = "http")]
impl Embedder for LiveProvider {
    fn embed(&self, text: &str) -> Result<Vec<f32>, foamforge_core::LlmError> {
        match &self.hash {
            Some(h) => h.embed(text),
            None => self.chat.embed(text),
        }
    }
}

#[cfg(feature = "http")]
impl Provider for LiveProvider {
    fn complete(
        &self,
        req: &foamforge_core::llm::CompletionRequest,
    ) -> Result<foamforge_core::llm::CompletionResult, foamforge_core::LlmError> {
        self.chat.complete(req)
    }
}

#[cfg(feature = "http")]
fn live_provider(resolved: &Resolved, index: &IndexSet, marker: Option<&EmbedderMarker>) -> anyhow::Result<Arc<dyn Provider>> {
    let chat = foamforge_core::llm::HttpProvider::new(resolved.llm.clone()).map_err(|e| usage(e.to_string()))?;
    let hash = match marker {
        Some(m) if m.kind == "hash" => Some(HashEmbedder::new(index.dim())),
        _ => None,
    };
    Ok(Arc::new(LiveProvider { chat, hash }))
}

#[cfg(not(feature = "http"))]
fn live_provider(_: &Resolved, _: &IndexSet, _: Option<&EmbedderMarker>) -> anyhow::Result<Arc<dyn Provider>> {
    Err(usage("this build has no language-model client; use --scenario for offline runs"))
}

fn required_index(resolved: &Resolved) -> anyhow::Result<&Path> {
    resolved
        .index
        .as_deref()
        .ok_or_else(|| usage("no retrieval index: pass --index or set [paths].index (build one with `foamforge index build`)"))
}

fn default_case_id() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("case-{secs}")
}

fn print_summary(state: &CaseState, workdir: &Path, as_json: bool) {
    let dir = case_dir(workdir, &state.case_id);
    if as_json {
        let summary = json!({
            "case_id": state.case_id,
            "run_status": state.run_status,
            "loop_count": state.loop_count,
            "token_usage": state.token_usage,
            "prompt_tokens": state.prompt_tokens,
            "completion_tokens": state.completion_tokens,
            "case_dir": dir.display().to_string(),
            "images": state.visualization_artifacts,
            "fault": state.fault,
            "tool_errors": state.tool_errors,
        });
        println!("{summary:#}");
        return;
    }
    let status = match state.run_status {
        RunStatus::Success => "success",
        RunStatus::Failure => "failure",
        RunStatus::NotRun => "not run",
    };
    println!("case      {}", state.case_id);
    println!("status    {status}");
    println!("loops     {}", state.loop_count);
    println!("tokens    {} ({} prompt, {} completion)", state.token_usage, state.prompt_tokens, state.completion_tokens);
    println!("case dir  {}", dir.display());
    for image in &state.visualization_artifacts {
        println!("image     {image}");
    }
    if let Some(fault) = &state.fault {
        println!("fault     {fault}");
    }
    for e in &state.tool_errors {
        println!("warning   {e}");
    }
}

pub fn run(paths: &PathArgs, flags: &ConfigArgs, args: &RunArgs) -> anyhow::Result<u8> {
    let resolved = resolve(paths, flags)?;
    let prompts = prompts(&resolved)?;
    let vocab = VocabularySets::bundled();
    let attachments: Vec<String> = args.attachments.iter().map(|p| p.display().to_string()).collect();

    let (case_id, requirement, config, provider, indices, default_exec) = match &args.scenario {
        Some(name) => {
            let spec = find_scenario(name, args.suite.as_deref())?;
            let indices = match &resolved.index {
                Some(dir) => load_index(dir)?.0,
                None => scenario_indices(resolved.config.embedding_dim)?,
            };
            let provider: Arc<dyn Provider> = Arc::new(ScenarioProvider::with_dim(spec.clone(), indices.dim()));
            let id = args.case_id.clone().unwrap_or_else(|| spec.name.clone());
            (id, spec.requirement(), spec.config(&resolved.config), provider, indices, ExecutorChoice::Simulated)
        }
        None => {
            let requirement = match (&args.prompt, &args.prompt_file) {
                (Some(text), _) => text.clone(),
                (None, Some(file)) => std::fs::read_to_string(file)
                    .map_err(|e| usage(format!("cannot read prompt file {}: {e}", file.display())))?,
                (None, None) => bail!(UsageError("give a prompt file, --prompt TEXT or --scenario NAME".into())),
            };
            if requirement.trim().is_empty() {
                bail!(UsageError("the requirement is empty".into()));
            }
            let (indices, marker) = load_index(required_index(&resolved)?)?;
            let provider = live_provider(&resolved, &indices, marker.as_ref())?;
            let id = args.case_id.clone().unwrap_or_else(default_case_id);
            (id, requirement, resolved.config.clone(), provider, indices, ExecutorChoice::Local)
        }
    };
    if !is_filesystem_safe(&case_id) {
        bail!(UsageError(format!("case id '{case_id}' is not usable as a directory name")));
    }
    let executor = executor(args.executor.unwrap_or(default_exec), &config)?;
    let deps = WorkflowDeps {
        provider: provider.as_ref(),
        executor: executor.as_ref(),
        indices: &indices,
        prompts: &prompts,
        vocab: &vocab,
        commands: None,
        workdir: resolved.workdir.clone(),
    };
    let outcome = run_workflow(&case_id, &requirement, &attachments, &config, &deps)?;
    print_summary(&outcome.state, &resolved.workdir, args.json);
    Ok(if outcome.state.run_status == RunStatus::Success { 0 } else { EXIT_FAILURE })
}

pub fn index(paths: &PathArgs, flags: &ConfigArgs, cmd: &IndexCommand) -> anyhow::Result<u8> {
    match cmd {
        IndexCommand::Build { corpus_root, out, embedder } => {
            let resolved = resolve(paths, flags)?;
            let records = ingest_corpus(corpus_root).map_err(|e| usage(e.to_string()))?;
            let dim = resolved.config.embedding_dim;
            let (set, marker) = match embedder {
                EmbedderChoice::Hash => {
                    let set = build_index_set(&records, &HashEmbedder::new(dim), dim)?;
                    (set, EmbedderMarker { kind: "hash".into(), model: None })
                }
                EmbedderChoice::Http => {
                    let set = build_with_http(&resolved, &records, dim)?;
                    (set, EmbedderMarker { kind: "http".into(), model: Some(resolved.llm.embedding_model.clone()) })
                }
            };
            set.save(out).with_context(|| format!("saving index to {}", out.display()))?;
            let marker_path = out.join(EMBEDDER_MARKER);
            std::fs::write(&marker_path, serde_json::to_string_pretty(&marker)?)
                .with_context(|| format!("writing {}", marker_path.display()))?;
            println!("indexed {} case(s) from {} into {}", records.len(), corpus_root.display(), out.display());
            print_counts(&set);
            Ok(0)
        }
        IndexCommand::Info { dir } => {
            let (set, marker) = load_index(dir)?;
            println!("dim {}", set.dim());
            if let Some(m) = marker {
                println!("embedder {}{}", m.kind, m.model.map(|m| format!(" ({m})")).unwrap_or_default());
            }
            print_counts(&set);
            Ok(0)
        }
    }
}

fn print_counts(set: &IndexSet) {
    for kind in IndexKind::ALL {
        let n = set.get(kind).map(|i| i.len()).unwrap_or(0);
        println!("  {kind:<24} {n}");
    }
}

#[cfg(feature = "http")]
fn build_with_http(resolved: &Resolved, records: &[foamforge_core::index::CaseRecord], dim: usize) -> anyhow::Result<IndexSet> {
    let provider = foamforge_core::llm::HttpProvider::new(resolved.llm.clone()).map_err(|e| usage(e.to_string()))?;
    Ok(build_index_set(records, &provider, dim)?)
}

#[cfg(not(feature = "http"))]
fn build_with_http(_: &Resolved, _: &[foamforge_core::index::CaseRecord], _: usize) -> anyhow::Result<IndexSet> {
    Err(usage("this build has no HTTP embedder; use --embedder hash"))
}

pub fn serve(paths: &PathArgs, flags: &ConfigArgs, args: &ServeArgs) -> anyhow::Result<u8> {
    let resolved = resolve(paths, flags)?;
    let mut deps = match &args.scenario {
        Some(name) => {
            let spec = find_scenario(name, args.suite.as_deref())?;
            foamforge_core::scenario::service_deps(&spec, resolved.config.clone(), &resolved.workdir)?
        }
        None => {
            let (indices, marker) = load_index(required_index(&resolved)?)?;
            let provider = live_provider(&resolved, &indices, marker.as_ref())?;
            ServiceDeps {
                provider,
                executor: executor(args.executor.unwrap_or(ExecutorChoice::Local), &resolved.config)?,
                submitter: None,
                indices: Arc::new(indices),
                prompts: Arc::new(prompts(&resolved)?),
                vocab: Arc::new(VocabularySets::bundled()),
                config: resolved.config.clone(),
                workdir: resolved.workdir.clone(),
                hpc_poll_interval: Duration::from_secs(30),
            }
        }
    };
    if let (Some(choice), Some(_)) = (args.executor, &args.scenario) {
        deps.executor = executor(choice, &deps.config)?;
    }
    if args.slurm {
        deps.submitter = Some(Arc::new(SlurmSubmitter::default()) as Arc<dyn Submitter>);
    }
    if resolved.prompts.is_some() {
        deps.prompts = Arc::new(prompts(&resolved)?);
    }
    let mode = if args.job_workers == 0 { JobMode::Stepped } else { JobMode::Workers(args.job_workers) };
    let service = McpService::new(deps, mode);
    match &args.listen {
        Some(addr) => {
            let listener = TcpListener::bind(addr).map_err(|e| usage(format!("cannot listen on {addr}: {e}")))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_listener(Arc::new(service), listener)?;
        }
        None => {
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            serve_stream(&service, stdin.lock(), stdout.lock())?;
        }
    }
    Ok(0)
}

pub fn bench(paths: &PathArgs, flags: &ConfigArgs, args: &BenchArgs) -> anyhow::Result<u8> {
    let resolved = resolve(paths, flags)?;
    if args.jobs == 0 {
        bail!(UsageError("--jobs must be at least 1".into()));
    }
    let suite = match &args.suite_file {
        Some(p) => load_suite(p)?,
        None => Suite::repair(),
    };
    let toggles = args.toggles.iter().map(|t| t.parse::<Toggle>()).collect::<Result<Vec<_>, _>>()?;
    let kit = ScenarioKit::new(resolved.config.embedding_dim)?;
    let configs = config_matrix(&resolved.config, &toggles);
    let workdir: PathBuf = resolved.workdir.join("bench");
    let rows = run_bench(&kit, &suite, &configs, args.jobs, &workdir)?;
    let csv = to_csv(&rows)?;
    match &args.out {
        Some(path) => std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(0)
}
