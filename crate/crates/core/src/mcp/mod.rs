//! The engine's capabilities as eleven atomic tools, a job store for the
//! asynchronous ones, and a JSON-RPC 2.0 wire front end.
//!
//! Every call works on a copy of the case state; the copy replaces the
//! stored state only when the call succeeds. A failed call leaves the case
//! as it was apart from an entry in its `tool_errors`.

pub mod client;
mod jobs;
pub mod schema;
mod tools;
mod wire;

pub use jobs::{JobKind, JobMode, JobOutput, JobRecord, JobStatus, JobStore, JobWork};
pub use tools::{find_tool, register_tools, ToolDescriptor};
pub use wire::{PROTOCOL_VERSION, read_frame, serve_listener, serve_stream, serve_tcp, write_frame, Dispatcher, Framing};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::agents::{
    apply_modifications, architect_plan, attach_logs, generate_allrun, generate_file, generate_hpc_script, prepare_mesh,
    relint, review, run_simulation, select_mesh_mode, visualize, AgentContext, AgentError, HpcConfig, MeshMode,
    TimeSelection, VisualizationRequest,
};
use crate::case::{
    case_dir, generation_order, load_state, save_state, state_path, upsert_file, CaseState, FoamFile, RunStatus, Severity,
    VocabularySets,
};
use crate::config::Config;
use crate::exec::{Executor, HpcExecutor, Submitter};
use crate::index::IndexSet;
use crate::llm::Provider;
use crate::prompts::PromptLibrary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McpError {
    #[error("unknown tool '{0}'")]
    UnknownTool(String),
    #[error("{direction} of {tool} violates its schema at {path}: {message}")]
    SchemaViolation { tool: String, direction: &'static str, path: String, message: String },
    #[error("unknown case '{0}'")]
    UnknownCase(String),
    #[error("unknown job '{0}'")]
    UnknownJob(String),
    #[error("{tool} failed: {message}")]
    ToolFailed { tool: String, message: String },
}

impl McpError {
    /// JSON-RPC error code.
    pub fn code(&self) -> i64 {
        match self {
            McpError::UnknownTool(_) | McpError::SchemaViolation { direction: "input", .. } => -32602,
            McpError::SchemaViolation { .. } => -32603,
            McpError::UnknownCase(_) => -32001,
            McpError::UnknownJob(_) => -32002,
            McpError::ToolFailed { .. } => -32003,
        }
    }

    /// Machine-readable detail carried in the error's `data` member.
    pub fn data(&self) -> Value {
        match self {
            McpError::UnknownTool(name) => json!({ "kind": "unknown_tool", "tool": name }),
            McpError::SchemaViolation { tool, direction, path, message } => {
                json!({ "kind": "schema_violation", "tool": tool, "direction": direction, "path": path, "detail": message })
            }
            McpError::UnknownCase(id) => json!({ "kind": "unknown_case", "case_id": id }),
            McpError::UnknownJob(id) => json!({ "kind": "unknown_job", "job_id": id }),
            McpError::ToolFailed { tool, message } => json!({ "kind": "tool_failed", "tool": tool, "detail": message }),
        }
    }
}

/// Shared, thread-safe inputs of the service.
pub struct ServiceDeps {
    pub provider: Arc<dyn Provider>,
    pub executor: Arc<dyn Executor>,
    /// Scheduler used for `run_simulation` with environment `hpc`.
    pub submitter: Option<Arc<dyn Submitter>>,
    pub indices: Arc<IndexSet>,
    pub prompts: Arc<PromptLibrary>,
    pub vocab: Arc<VocabularySets>,
    pub config: Config,
    /// Cases live under `<workdir>/<case_id>/`.
    pub workdir: PathBuf,
    pub hpc_poll_interval: Duration,
}

type CaseSlot = Arc<Mutex<CaseState>>;

struct Shared {
    deps: ServiceDeps,
    cases: Mutex<BTreeMap<String, CaseSlot>>,
}

impl Shared {
    fn context(&self) -> AgentContext<'_> {
        let d = &self.deps;
        AgentContext::new(&*d.provider, &d.indices, &d.prompts, &d.vocab, &d.config)
    }

    fn slot(&self, case_id: &str) -> Result<CaseSlot, McpError> {
        let mut cases = self.cases.lock().expect("case table");
        if let Some(s) = cases.get(case_id) {
            return Ok(Arc::clone(s));
        }
        if !crate::case::is_filesystem_safe(case_id) || !state_path(&self.deps.workdir, case_id).is_file() {
            return Err(McpError::UnknownCase(case_id.to_string()));
        }
        let state = load_state(&self.deps.workdir, case_id).map_err(|_| McpError::UnknownCase(case_id.to_string()))?;
        let slot = Arc::new(Mutex::new(state));
        cases.insert(case_id.to_string(), Arc::clone(&slot));
        Ok(slot)
    }

    /// Runs `op` on a copy of the case and commits it on success.
    fn with_case<T>(
        &self,
        tool: &str,
        case_id: &str,
        op: impl FnOnce(&mut CaseState) -> Result<T, AgentError>,
    ) -> Result<T, McpError> {
        let slot = self.slot(case_id)?;
        let mut state = slot.lock().expect("case state");
        let mut draft = state.clone();
        let saved = match op(&mut draft) {
            Ok(out) => {
                *state = draft;
                Ok(out)
            }
            Err(e) => {
                state.tool_errors.push(format!("{tool}: {e}"));
                Err(McpError::ToolFailed { tool: tool.to_string(), message: e.to_string() })
            }
        };
        save_state(&self.deps.workdir, &state)
            .map_err(|e| McpError::ToolFailed { tool: tool.to_string(), message: e.to_string() })?;
        saved
    }
}

pub struct McpService {
    shared: Arc<Shared>,
    jobs: JobStore,
}

#[derive(Deserialize)]
struct FileEdit {
    file: String,
    folder: String,
    content: String,
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct MeshConfig {
    mode: Option<MeshMode>,
    source_path: Option<String>,
    boundary_names: Option<Vec<String>>,
}

fn arg<'a>(args: &'a Value, key: &str) -> &'a str {
    args.get(key).and_then(Value::as_str).unwrap_or_default()
}

fn precondition(msg: impl Into<String>) -> AgentError {
    AgentError::Precondition(msg.into())
}

fn parse_arg<T: for<'de> Deserialize<'de>>(tool: &str, args: &Value, key: &str) -> Result<T, McpError> {
    serde_json::from_value(args.get(key).cloned().unwrap_or(Value::Null)).map_err(|e| McpError::SchemaViolation {
        tool: tool.to_string(),
        direction: "input",
        path: format!("$.{key}"),
        message: e.to_string(),
    })
}

impl McpService {
    pub fn new(deps: ServiceDeps, mode: JobMode) -> Self {
        McpService { shared: Arc::new(Shared { deps, cases: Mutex::new(BTreeMap::new()) }), jobs: JobStore::new(mode) }
    }

    pub fn tools(&self) -> Vec<ToolDescriptor> {
        register_tools()
    }

    pub fn jobs(&self) -> &JobStore {
        &self.jobs
    }

    /// A copy of the stored state of a case.
    pub fn case_state(&self, case_id: &str) -> Result<CaseState, McpError> {
        Ok(self.shared.slot(case_id)?.lock().expect("case state").clone())
    }

    /// Validates `args`, runs the tool and validates its result.
    pub fn handle_call(&self, name: &str, args: &Value) -> Result<Value, McpError> {
        let tool = find_tool(name).ok_or_else(|| McpError::UnknownTool(name.to_string()))?;
        schema::validate(&tool.input_schema, args).map_err(|(path, message)| McpError::SchemaViolation {
            tool: name.to_string(),
            direction: "input",
            path,
            message,
        })?;
        let out = self.dispatch(name, args)?;
        schema::validate(&tool.output_schema, &out).map_err(|(path, message)| McpError::SchemaViolation {
            tool: name.to_string(),
            direction: "output",
            path,
            message,
        })?;
        Ok(out)
    }

    fn dispatch(&self, name: &str, args: &Value) -> Result<Value, McpError> {
        let sh = &self.shared;
        let case_id = arg(args, "case_id");
        match name {
            "create_case" => {
                let id = format!("case-{}", &uuid::Uuid::new_v4().simple().to_string()[..12]);
                let mut state = CaseState::new(&id, arg(args, "user_prompt"));
                state.attachments = parse_arg::<Option<Vec<String>>>(name, args, "attachments")?.unwrap_or_default();
                save_state(&sh.deps.workdir, &state)
                    .map_err(|e| McpError::ToolFailed { tool: name.into(), message: e.to_string() })?;
                sh.cases.lock().expect("case table").insert(id.clone(), Arc::new(Mutex::new(state)));
                Ok(json!({ "case_id": id }))
            }
            "plan_simulation_structure" => {
                let cx = sh.context();
                let plan = sh.with_case(name, case_id, |state| {
                    architect_plan(&cx, state)?;
                    let order = generation_order(&state.plan, sh.deps.config.file_dependency_enabled)?;
                    let mut plan: Vec<Value> = order.iter().map(|f| json!({ "file": f.file_name, "folder": f.folder_name })).collect();
                    plan.push(json!({ "file": "Allrun", "folder": "" }));
                    Ok(plan)
                })?;
                Ok(json!({ "plan": plan }))
            }
            "generate_file_content" => {
                let cx = sh.context();
                let (file, folder) = (arg(args, "file"), arg(args, "folder"));
                let content = sh.with_case(name, case_id, |state| {
                    if state.descriptor.is_none() {
                        return Err(precondition("plan the case before generating files"));
                    }
                    let generated = if file == "Allrun" && folder.is_empty() {
                        generate_allrun(&cx, state)?
                    } else {
                        let order = generation_order(&state.plan, sh.deps.config.file_dependency_enabled)?;
                        let prior: Vec<FoamFile> = order
                            .iter()
                            .filter(|p| p.file_name != file || p.folder_name != folder)
                            .filter_map(|p| state.file(&p.folder_name, &p.file_name).cloned())
                            .collect();
                        generate_file(&cx, state, folder, file, &prior)?
                    };
                    upsert_file(&mut state.foamfiles, generated.clone());
                    relint(state);
                    Ok(generated.content)
                })?;
                Ok(json!({ "content": content }))
            }
            "generate_mesh" => {
                let cfg: MeshConfig = parse_arg(name, args, "mesh_config")?;
                let current = self.case_state(case_id)?;
                let mut spec = select_mesh_mode(&current.user_requirement, &current.attachments);
                if let Some(mode) = cfg.mode {
                    spec.mode = mode;
                }
                if cfg.source_path.is_some() {
                    spec.source_path = cfg.source_path;
                }
                if let Some(names) = cfg.boundary_names {
                    spec.boundary_names = names;
                }
                let shared = Arc::clone(sh);
                let id = case_id.to_string();
                Ok(json!({ "job_id": self.jobs.enqueue(JobKind::Mesh, case_id, Box::new(move || {
                    let cx = shared.context();
                    let r = shared.with_case("generate_mesh", &id, |state| prepare_mesh(&cx, state, &spec));
                    match r {
                        Ok(mesh) => JobOutput {
                            succeeded: true,
                            summary: json!({
                                "mode": mesh.spec.mode,
                                "commands": mesh.commands,
                                "artifacts": mesh.artifacts.iter().map(FoamFile::id).collect::<Vec<_>>(),
                            }),
                            logs: BTreeMap::new(),
                        },
                        Err(e) => failed_job(&e),
                    }
                })) }))
            }
            "generate_hpc_script" => {
                let cfg: HpcConfig = parse_arg(name, args, "hpc_config")?;
                let dir = case_dir(&sh.deps.workdir, case_id).display().to_string();
                let script = sh.with_case(name, case_id, |state| generate_hpc_script(state, &cfg, &dir))?;
                Ok(json!({ "script_content": script }))
            }
            "run_simulation" => {
                let hpc = arg(args, "environment") == "hpc";
                let current = self.case_state(case_id)?;
                let check = if current.file("", "Allrun").is_none() {
                    Err("the case has no Allrun script; generate it first")
                } else if hpc && current.hpc_script.is_none() {
                    Err("the case has no batch script; call generate_hpc_script first")
                } else if hpc && sh.deps.submitter.is_none() {
                    Err("no batch scheduler is configured")
                } else {
                    Ok(())
                };
                if let Err(msg) = check {
                    return Err(sh.with_case(name, case_id, |_| Err::<(), _>(precondition(msg))).unwrap_err());
                }
                let shared = Arc::clone(sh);
                let id = case_id.to_string();
                Ok(json!({ "job_id": self.jobs.enqueue(JobKind::Simulation, case_id, Box::new(move || {
                    simulation_job(&shared, &id, hpc)
                })) }))
            }
            "check_job_status" => {
                let job_id = arg(args, "job_id");
                let record = self.jobs.get(job_id).ok_or_else(|| McpError::UnknownJob(job_id.to_string()))?;
                // In stepped mode a poll is the clock: it reports, then moves the job on.
                if self.jobs.mode() == JobMode::Stepped {
                    self.jobs.advance(job_id);
                }
                Ok(json!({ "status": record }))
            }
            "get_simulation_logs" => {
                let job_id = arg(args, "job_id");
                let record = self
                    .jobs
                    .get(job_id)
                    .filter(|r| r.case_id == case_id)
                    .ok_or_else(|| McpError::UnknownJob(job_id.to_string()))?;
                if !record.status.is_terminal() {
                    return Err(McpError::ToolFailed { tool: name.into(), message: format!("job {job_id} has not finished") });
                }
                Ok(json!({ "logs": record.logs }))
            }
            "review_and_suggest_fix" => {
                let logs: BTreeMap<String, String> = match &args["logs"] {
                    Value::String(s) => BTreeMap::from([("log".to_string(), s.clone())]),
                    other => serde_json::from_value(other.clone()).unwrap_or_default(),
                };
                let cx = sh.context();
                let analysis = sh.with_case(name, case_id, |state| {
                    attach_logs(state, logs);
                    let analysis = review(&cx, state)?;
                    state.loop_count += 1;
                    Ok(analysis)
                })?;
                let mods: Vec<Value> = analysis
                    .proposed_modifications
                    .iter()
                    .map(|f| json!({ "file": f.file_name, "folder": f.folder_name, "content": f.content }))
                    .collect();
                Ok(json!({ "suggestions": { "analysis": analysis.analysis_text, "modifications": mods } }))
            }
            "apply_fix" => {
                let edits: Vec<FileEdit> = parse_arg(name, args, "modifications")?;
                let files: Vec<FoamFile> = edits.iter().map(|e| FoamFile::new(&e.folder, &e.file, e.content.clone())).collect();
                let n = sh.with_case(name, case_id, |state| {
                    *state = apply_modifications(state, &files);
                    relint(state);
                    Ok(files.len())
                })?;
                Ok(json!({ "status": format!("applied {n} file(s)") }))
            }
            "generate_visualization" => {
                let request = VisualizationRequest {
                    quantity: arg(args, "quantity").to_string(),
                    plane: args.get("plane").and_then(Value::as_str).map(str::to_string),
                    time: args.get("time").map(|t| match t.as_f64() {
                        Some(x) => TimeSelection::Value(x),
                        None => TimeSelection::Latest("latest".into()),
                    }),
                    output_name: args.get("output_name").and_then(Value::as_str).map(str::to_string),
                };
                if self.case_state(case_id)?.run_status != RunStatus::Success {
                    let msg = "visualization needs a successful run";
                    return Err(sh.with_case(name, case_id, |_| Err::<(), _>(precondition(msg))).unwrap_err());
                }
                let shared = Arc::clone(sh);
                let id = case_id.to_string();
                Ok(json!({ "job_id": self.jobs.enqueue(JobKind::Visualization, case_id, Box::new(move || {
                    let cx = shared.context();
                    let dir = case_dir(&shared.deps.workdir, &id);
                    let r = shared.with_case("generate_visualization", &id, |state| {
                        visualize(&cx, state, &*shared.deps.executor, &dir, &request)
                    });
                    match r {
                        Ok(images) => JobOutput { succeeded: true, summary: json!({ "images": images }), logs: BTreeMap::new() },
                        Err(e) => failed_job(&e),
                    }
                })) }))
            }
            other => Err(McpError::UnknownTool(other.to_string())),
        }
    }
}

fn failed_job(e: &McpError) -> JobOutput {
    JobOutput { succeeded: false, summary: json!({ "error": e.to_string() }), logs: BTreeMap::new() }
}

fn simulation_job(shared: &Shared, case_id: &str, hpc: bool) -> JobOutput {
    let deps = &shared.deps;
    let r = shared.with_case("run_simulation", case_id, |state| {
        let result = match (&deps.submitter, hpc) {
            (Some(sub), true) => {
                let script = state.hpc_script.clone().unwrap_or_default();
                let mut exec = HpcExecutor::new(Arc::clone(sub), script);
                exec.poll_interval = deps.hpc_poll_interval;
                run_simulation(state, &exec, &deps.workdir)?
            }
            _ => run_simulation(state, &*deps.executor, &deps.workdir)?,
        };
        let count = |s: Severity| state.last_errors.iter().filter(|e| e.severity == s).count();
        let summary = json!({
            "run_status": state.run_status,
            "fatal_errors": count(Severity::Fatal),
            "warnings": count(Severity::Warning),
            "attempts": state.history.len(),
            "logs": result.logs.keys().collect::<Vec<_>>(),
        });
        Ok((result.is_success(), summary, result.logs))
    });
    match r {
        Ok((succeeded, summary, logs)) => JobOutput { succeeded, summary, logs },
        Err(e) => failed_job(&e),
    }
}
