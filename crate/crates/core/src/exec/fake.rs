use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use super::{ExecError, ExecStatus, ExecutionResult, Executor};

/// One scripted outcome, plus files to drop into the case directory when it
/// is replayed (e.g. the image a plotting script would have produced).
#[derive(Debug, Clone, PartialEq)]
pub struct FakeStep {
    pub result: ExecutionResult,
    pub writes: Vec<(String, Vec<u8>)>,
}

impl FakeStep {
    pub fn success() -> Self {
        Self::from_result(ExecutionResult::from_parts(BTreeMap::new(), BTreeMap::new()))
    }

    /// A failed run whose only log is `log_name` with `text`, and whose
    /// command (the log name without its `log.` prefix) exited with 1.
    pub fn failure(log_name: &str, text: &str) -> Self {
        let cmd = log_name.strip_prefix("log.").unwrap_or(log_name).to_string();
        let mut r = ExecutionResult::from_parts(
            BTreeMap::from([(log_name.to_string(), text.to_string())]),
            BTreeMap::from([(cmd, 1)]),
        );
        r.status = ExecStatus::Failure;
        Self::from_result(r)
    }

    pub fn from_result(result: ExecutionResult) -> Self {
        FakeStep { result, writes: Vec::new() }
    }

    pub fn writing(mut self, path: &str, contents: impl Into<Vec<u8>>) -> Self {
        self.writes.push((path.to_string(), contents.into()));
        self
    }
}

/// Replays scripted outcomes in order and records every call.
#[derive(Debug, Default)]
pub struct FakeExecutor {
    steps: Mutex<VecDeque<FakeStep>>,
    calls: Mutex<Vec<String>>,
}

impl FakeExecutor {
    pub fn new(steps: impl IntoIterator<Item = FakeStep>) -> Self {
        FakeExecutor { steps: Mutex::new(steps.into_iter().collect()), calls: Mutex::new(Vec::new()) }
    }

    /// Outcomes that always fail with the same log.
    pub fn always_failing(n: usize, log_name: &str, text: &str) -> Self {
        Self::new((0..n).map(|_| FakeStep::failure(log_name, text)))
    }

    /// `prepare`, `run`, or `run_script:<name>` per call, in order.
    pub fn invocations(&self) -> Vec<String> {
        self.calls.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.steps.lock().unwrap().len()
    }

    fn replay(&self, case_dir: &Path, call: String) -> Result<ExecutionResult, ExecError> {
        let mut calls = self.calls.lock().unwrap();
        calls.push(call);
        let n_runs = calls.iter().filter(|c| *c != "prepare").count();
        let step = self.steps.lock().unwrap().pop_front().ok_or(ExecError::ScriptExhausted { calls: n_runs })?;
        for (rel, bytes) in &step.writes {
            let p = case_dir.join(rel);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent).map_err(|e| ExecError::io(parent, e))?;
            }
            std::fs::write(&p, bytes).map_err(|e| ExecError::io(&p, e))?;
        }
        Ok(step.result)
    }
}

impl Executor for FakeExecutor {
    fn prepare(&self, _case_dir: &Path) -> Result<(), ExecError> {
        self.calls.lock().unwrap().push("prepare".into());
        Ok(())
    }

    fn run(&self, case_dir: &Path) -> Result<ExecutionResult, ExecError> {
        self.replay(case_dir, "run".into())
    }

    fn run_script(&self, case_dir: &Path, script: &str) -> Result<ExecutionResult, ExecError> {
        self.replay(case_dir, format!("run_script:{script}"))
    }
}
