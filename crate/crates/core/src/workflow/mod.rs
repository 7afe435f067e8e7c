//! The case graph: architect, meshing, input writer, runner, the runner and
//! reviewer repair loop, optional visualization, and the trace of it all.

mod trace;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use trace::{
    node_sequence, replay, request_hash, request_hashes, EventKind, TraceError, TraceEvent, TraceLog, TracingExecutor,
    TracingProvider,
};

use crate::agents::requirement::{hpc_request, visualization_request};
use crate::agents::{
    apply_modifications, architect_plan, generate_hpc_script, prepare_mesh, relint, review, run_simulation,
    select_mesh_mode, visualize, write_inputs, AgentContext, AgentError,
};
use crate::case::{case_dir, save_state, AttemptRecord, CaseError, CaseState, RunStatus, VocabularySets};
use crate::config::{Config, ConfigError};
use crate::exec::Executor;
use crate::index::{CommandDoc, IndexSet};
use crate::llm::Provider;
use crate::prompts::PromptLibrary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Architect,
    Meshing,
    InputWriter,
    Runner,
    Reviewer,
    Visualization,
    End,
}

impl Node {
    pub const ALL: [Node; 7] =
        [Node::Architect, Node::Meshing, Node::InputWriter, Node::Runner, Node::Reviewer, Node::Visualization, Node::End];

    pub fn as_str(self) -> &'static str {
        match self {
            Node::Architect => "architect",
            Node::Meshing => "meshing",
            Node::InputWriter => "input_writer",
            Node::Runner => "runner",
            Node::Reviewer => "reviewer",
            Node::Visualization => "visualization",
            Node::End => "end",
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Case(#[from] CaseError),
}

/// The edge taken out of `current`. A recorded fault ends the run from any node.
pub fn route_next(current: Node, state: &CaseState, config: &Config, visualization_requested: bool) -> Node {
    if state.fault.is_some() {
        return Node::End;
    }
    match current {
        Node::Architect => Node::Meshing,
        Node::Meshing => Node::InputWriter,
        Node::InputWriter => Node::Runner,
        Node::Reviewer => Node::Runner,
        Node::Runner => match state.run_status {
            RunStatus::Success if visualization_requested => Node::Visualization,
            RunStatus::Failure if config.reviewer_enabled && state.loop_count < config.max_loops => Node::Reviewer,
            _ => Node::End,
        },
        Node::Visualization | Node::End => Node::End,
    }
}

/// Upper bound on node entries for one run: the four setup nodes, two per
/// repair loop plus the final run, the end node and one visualization.
pub fn node_budget(config: &Config) -> usize {
    5 + 2 * config.max_loops as usize + 1
}

/// The attempt with the fewest fatal errors; ties go to the later attempt.
pub fn best_attempt(history: &[AttemptRecord]) -> Option<&AttemptRecord> {
    history.iter().rev().min_by_key(|a| a.fatal_count())
}

/// Everything a run needs besides its requirement.
pub struct WorkflowDeps<'a> {
    pub provider: &'a dyn Provider,
    pub executor: &'a dyn Executor,
    pub indices: &'a IndexSet,
    pub prompts: &'a PromptLibrary,
    pub vocab: &'a VocabularySets,
    pub commands: Option<Vec<CommandDoc>>,
    /// Cases are written under `<workdir>/<case_id>/`.
    pub workdir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct WorkflowOutcome {
    pub state: CaseState,
    pub trace: Vec<TraceEvent>,
}

pub fn trace_path(workdir: &Path, case_id: &str) -> PathBuf {
    workdir.join(case_id).join("trace.ndjson")
}

fn summary(state: &CaseState) -> serde_json::Value {
    json!({
        "run_status": state.run_status,
        "loop_count": state.loop_count,
        "files": state.foamfiles.len(),
        "history": state.history.len(),
        "token_usage": state.token_usage,
        "lint_findings": state.lint.parse_errors.len() + state.lint.inconsistencies.len(),
        "fault": state.fault,
    })
}

struct Engine<'a> {
    cx: AgentContext<'a>,
    executor: &'a dyn Executor,
    workdir: &'a Path,
    trace: &'a TraceLog,
}

impl Engine<'_> {
    fn step(&self, node: Node, state: &mut CaseState) -> Result<serde_json::Value, AgentError> {
        let mut details = json!({});
        match node {
            Node::Architect => {
                let (descriptor, plan) = architect_plan(&self.cx, state)?;
                details = json!({ "descriptor": descriptor, "planned": plan.files.len(), "reference": plan.source_reference });
            }
            Node::Meshing => {
                let spec = select_mesh_mode(&state.user_requirement, &state.attachments);
                let mesh = prepare_mesh(&self.cx, state, &spec)?;
                details = json!({ "mode": mesh.spec.mode, "commands": mesh.commands });
            }
            Node::InputWriter => {
                let files = write_inputs(&self.cx, state)?;
                if let Some(cfg) = hpc_request(&state.user_requirement) {
                    let dir = case_dir(self.workdir, &state.case_id);
                    generate_hpc_script(state, &cfg, &dir.display().to_string())?;
                }
                details = json!({ "written": files.iter().map(|f| f.id()).collect::<Vec<_>>() });
            }
            Node::Runner => {
                run_simulation(state, self.executor, self.workdir)?;
            }
            Node::Reviewer => {
                let analysis = review(&self.cx, state)?;
                *state = apply_modifications(state, &analysis.proposed_modifications);
                relint(state);
                state.loop_count += 1;
                details = json!({
                    "modified": analysis.proposed_modifications.iter().map(|f| f.id()).collect::<Vec<_>>(),
                    "reverted": analysis.reverted,
                });
            }
            Node::Visualization => {
                if let Some(request) = visualization_request(&state.user_requirement) {
                    let dir = case_dir(self.workdir, &state.case_id);
                    let images = visualize(&self.cx, state, self.executor, &dir, &request)?;
                    details = json!({ "images": images });
                }
            }
            Node::End => {}
        }
        let retrievals = self.cx.take_retrievals();
        if !retrievals.is_empty() {
            details["retrievals"] = json!(retrievals);
        }
        Ok(details)
    }
}

/// Runs one case through the graph and persists its final state and trace
/// under `<workdir>/<case_id>/`.
///
/// Agent and backend errors do not escape: they are recorded as the state's
/// fault and end the run as a failure. A failed visualization is recorded
/// as a tool error and leaves a successful run successful. When the repair
/// loop gives up, the files of the best attempt are restored.
pub fn run_workflow(
    case_id: &str,
    requirement: &str,
    attachments: &[String],
    config: &Config,
    deps: &WorkflowDeps,
) -> Result<WorkflowOutcome, WorkflowError> {
    config.validate()?;
    let trace = TraceLog::to_file(&trace_path(&deps.workdir, case_id))?;
    let provider = TracingProvider { inner: deps.provider, trace: &trace };
    let executor = TracingExecutor { inner: deps.executor, trace: &trace };
    let mut cx = AgentContext::new(&provider, deps.indices, deps.prompts, deps.vocab, config);
    if let Some(commands) = &deps.commands {
        cx = cx.with_commands(commands.clone());
    }
    let engine = Engine { cx, executor: &executor, workdir: &deps.workdir, trace: &trace };

    let mut state = CaseState::new(case_id, requirement);
    state.attachments = attachments.to_vec();
    let wants_visualization = visualization_request(requirement).is_some();
    let budget = node_budget(config);
    let mut entries = 0usize;
    let mut node = Node::Architect;
    loop {
        entries += 1;
        assert!(entries <= budget, "node budget {budget} exceeded");
        engine.trace.set_node(node);
        engine.trace.record(EventKind::Entered, json!({ "entry": entries }))?;
        if node == Node::End {
            engine.trace.record(EventKind::Exited, json!({ "next": null }))?;
            break;
        }
        let mut delta = match engine.step(node, &mut state) {
            Ok(details) => details,
            Err(e) if node == Node::Visualization => {
                state.tool_errors.push(format!("{node}: {e}"));
                json!({ "error": e.to_string() })
            }
            Err(e) => {
                state.fault = Some(format!("{node}: {e}"));
                state.run_status = RunStatus::Failure;
                json!({ "error": e.to_string() })
            }
        };
        assert!(state.loop_count <= config.max_loops, "loop count exceeded its bound");
        let next = route_next(node, &state, config, wants_visualization);
        if node == Node::Runner && next == Node::End && state.run_status == RunStatus::Failure {
            if let Some(best) = best_attempt(&state.history) {
                delta["best_attempt"] = json!(best.attempt_number);
                state.foamfiles = best.file_snapshot.clone();
            }
        }
        delta["state"] = summary(&state);
        engine.trace.record(EventKind::StateDelta, delta)?;
        engine.trace.record(EventKind::Exited, json!({ "next": next }))?;
        node = next;
    }
    save_state(&deps.workdir, &state)?;
    Ok(WorkflowOutcome { state, trace: trace.events() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(status: RunStatus, loops: u32) -> CaseState {
        CaseState { run_status: status, loop_count: loops, ..CaseState::default() }
    }

    #[test]
    fn routing_table_is_exhaustive() {
        let on = Config::default();
        let off = Config { reviewer_enabled: false, ..Config::default() };
        let max = on.max_loops;
        let cases = [
            (Node::Architect, RunStatus::NotRun, 0, &on, false, Node::Meshing),
            (Node::Meshing, RunStatus::NotRun, 0, &on, false, Node::InputWriter),
            (Node::InputWriter, RunStatus::NotRun, 0, &on, false, Node::Runner),
            (Node::Runner, RunStatus::Success, 0, &on, false, Node::End),
            (Node::Runner, RunStatus::Success, 3, &on, true, Node::Visualization),
            (Node::Runner, RunStatus::Failure, 0, &on, false, Node::Reviewer),
            (Node::Runner, RunStatus::Failure, max - 1, &on, true, Node::Reviewer),
            (Node::Runner, RunStatus::Failure, max, &on, false, Node::End),
            (Node::Runner, RunStatus::Failure, 0, &off, false, Node::End),
            (Node::Runner, RunStatus::NotRun, 0, &on, false, Node::End),
            (Node::Reviewer, RunStatus::Failure, 1, &on, false, Node::Runner),
            (Node::Visualization, RunStatus::Success, 0, &on, true, Node::End),
            (Node::End, RunStatus::Success, 0, &on, true, Node::End),
        ];
        for (node, status, loops, cfg, vis, want) in cases {
            assert_eq!(route_next(node, &state(status, loops), cfg, vis), want, "{node} {status:?} {loops}");
        }
    }

    #[test]
    fn fault_ends_from_every_node() {
        let mut s = state(RunStatus::Failure, 0);
        s.fault = Some("x".into());
        for node in Node::ALL {
            assert_eq!(route_next(node, &s, &Config::default(), true), Node::End);
        }
    }

    #[test]
    fn best_attempt_prefers_fewest_fatals_then_latest() {
        use crate::case::{ErrorRecord, Severity};
        let rec = |n: u32, fatals: usize| AttemptRecord {
            attempt_number: n,
            file_snapshot: vec![],
            error_logs: String::new(),
            review_analysis: String::new(),
            errors: (0..fatals)
                .map(|_| ErrorRecord { message: "m".into(), location: "l".into(), severity: Severity::Fatal })
                .collect(),
        };
        let h = vec![rec(1, 2), rec(2, 1), rec(3, 3), rec(4, 1)];
        assert_eq!(best_attempt(&h).unwrap().attempt_number, 4);
        assert!(best_attempt(&[]).is_none());
    }
}
