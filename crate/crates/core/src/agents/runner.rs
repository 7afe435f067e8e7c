use std::path::Path;

use super::AgentError;
use crate::case::{materialize, AttemptRecord, CaseState, RunStatus, Severity};
use crate::exec::{extract_errors, persist_logs, render_errors, tail_lines, ExecutionResult, Executor, TAIL_LINES};

/// Batch script written next to the case files when the case targets a cluster.
pub const HPC_SCRIPT_NAME: &str = "submit.slurm";

/// Writes the case to disk, runs it, and records the outcome on the state.
/// A failed run appends an attempt record holding the files that failed and
/// the extracted errors; its review analysis is filled in later.
pub fn run_simulation(state: &mut CaseState, executor: &dyn Executor, workdir: &Path) -> Result<ExecutionResult, AgentError> {
    let case_dir = materialize(workdir, state)?;
    if let Some(script) = &state.hpc_script {
        let p = case_dir.join(HPC_SCRIPT_NAME);
        std::fs::write(&p, script).map_err(|e| AgentError::io(&p, e))?;
    }
    executor.prepare(&case_dir)?;
    let result = executor.run(&case_dir)?;
    persist_logs(&case_dir, &result)?;
    record_run(state, &result);
    Ok(result)
}

pub(crate) fn record_run(state: &mut CaseState, result: &ExecutionResult) {
    state.execution_logs = result.combined_logs();
    state.last_errors = extract_errors(result);
    if result.is_success() {
        state.run_status = RunStatus::Success;
        return;
    }
    state.run_status = RunStatus::Failure;
    let fatal: Vec<_> = state.last_errors.iter().filter(|e| e.severity == Severity::Fatal).cloned().collect();
    let error_logs = if fatal.is_empty() { tail_lines(&state.execution_logs, TAIL_LINES) } else { render_errors(&fatal) };
    state.history.push(AttemptRecord {
        attempt_number: state.history.len() as u32 + 1,
        file_snapshot: state.foamfiles.clone(),
        error_logs,
        review_analysis: String::new(),
        errors: state.last_errors.clone(),
    });
}

/// Treats `logs` as the output of the latest run, which is taken to have
/// failed. They replace the logs of the latest attempt when it has not been
/// reviewed yet; otherwise they start a new attempt.
pub(crate) fn attach_logs(state: &mut CaseState, logs: std::collections::BTreeMap<String, String>) {
    let result = ExecutionResult::from_parts(logs, Default::default());
    let reviewed = state.history.last().map_or(true, |a| !a.review_analysis.is_empty());
    if reviewed {
        record_run(state, &ExecutionResult { status: crate::exec::ExecStatus::Failure, ..result });
        return;
    }
    state.execution_logs = result.combined_logs();
    state.last_errors = extract_errors(&result);
    state.run_status = RunStatus::Failure;
    let fatal: Vec<_> = state.last_errors.iter().filter(|e| e.severity == Severity::Fatal).cloned().collect();
    let last = state.history.last_mut().expect("an unreviewed attempt exists");
    last.error_logs = if fatal.is_empty() { tail_lines(&state.execution_logs, TAIL_LINES) } else { render_errors(&fatal) };
    last.errors = state.last_errors.clone();
}
