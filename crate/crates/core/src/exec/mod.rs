//! Running a case and turning its logs into error records.

mod errors;
mod fake;
mod hpc;
mod local;

pub use errors::{extract_errors, render_errors, tail_lines, TAIL_LINES};
pub use fake::{FakeExecutor, FakeStep};
pub use hpc::{
    parse_sacct_state, parse_sbatch_output, parse_squeue_state, HpcExecutor, JobState, SlurmSubmitter, StubSubmitter,
    Submitter,
};
pub use local::{LocalExecutor, REAL_EXEC_ENV};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::Severity;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("executor script exhausted after {calls} calls")]
    ScriptExhausted { calls: usize },
    #[error("run exceeded the time budget of {budget_secs} s")]
    Timeout { budget_secs: u64 },
    #[error("could not start process: {0}")]
    SpawnFailure(String),
    #[error("real execution is disabled; set {REAL_EXEC_ENV}=1 on a machine with OpenFOAM installed")]
    Disabled,
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("unknown job '{0}'")]
    UnknownJob(String),
    #[error("scheduler error: {0}")]
    Scheduler(String),
}

impl ExecError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        ExecError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    /// Log name (`log.<command>`, `stdout`, `stderr`) to text.
    pub logs: BTreeMap<String, String>,
    /// Command to exit code.
    pub exit_codes: BTreeMap<String, i32>,
}

impl ExecutionResult {
    /// A result whose status is derived from its logs and exit codes: success
    /// iff every exit code is zero and no fatal block is present.
    pub fn from_parts(logs: BTreeMap<String, String>, exit_codes: BTreeMap<String, i32>) -> Self {
        let mut r = ExecutionResult { status: ExecStatus::Success, logs, exit_codes };
        if extract_errors(&r).iter().any(|e| e.severity == Severity::Fatal) {
            r.status = ExecStatus::Failure;
        }
        r
    }

    pub fn is_success(&self) -> bool {
        self.status == ExecStatus::Success
    }

    /// Every log concatenated under `==> name <==` banners.
    pub fn combined_logs(&self) -> String {
        let mut out = String::new();
        for (name, text) in &self.logs {
            out.push_str(&format!("==> {name} <==\n{text}"));
            if !text.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }
}

/// A backend that can run a materialized case directory.
pub trait Executor: Send + Sync {
    /// Removes artifacts of previous runs and sets up output capture.
    fn prepare(&self, case_dir: &Path) -> Result<(), ExecError>;
    /// Runs the case's `Allrun`.
    fn run(&self, case_dir: &Path) -> Result<ExecutionResult, ExecError>;
    /// Runs a single auxiliary script (mesh or plotting script) in the case directory.
    fn run_script(&self, case_dir: &Path, script: &str) -> Result<ExecutionResult, ExecError>;
}

/// Copies every log into `<case>/logs/`.
pub fn persist_logs(case_dir: &Path, result: &ExecutionResult) -> Result<(), ExecError> {
    let dir = case_dir.join("logs");
    std::fs::create_dir_all(&dir).map_err(|e| ExecError::io(&dir, e))?;
    for (name, text) in &result.logs {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| ExecError::io(&p, e))?;
    }
    Ok(())
}
