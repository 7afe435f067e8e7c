use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use super::{persist_logs, ExecError, ExecutionResult, Executor};

/// Environment flag that marks a real OpenFOAM install as present.
pub const REAL_EXEC_ENV: &str = "FOAMFORGE_REAL_EXEC";

/// Runs `Allrun` (or an auxiliary script) as a child process under a time budget.
#[derive(Debug, Clone)]
pub struct LocalExecutor {
    budget: Duration,
    enabled: bool,
}

impl LocalExecutor {
    /// Enabled only when `FOAMFORGE_REAL_EXEC=1`.
    pub fn from_env(budget: Duration) -> Self {
        LocalExecutor { budget, enabled: std::env::var(REAL_EXEC_ENV).as_deref() == Ok("1") }
    }

    /// Bypasses the environment gate. Meant for running plain shell scripts in tests.
    pub fn force_enabled(budget: Duration) -> Self {
        LocalExecutor { budget, enabled: true }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    fn exec(&self, case_dir: &Path, program: &str, args: &[&str], name: &str) -> Result<ExecutionResult, ExecError> {
        if !self.enabled {
            return Err(ExecError::Disabled);
        }
        let logs_dir = case_dir.join("logs");
        fs::create_dir_all(&logs_dir).map_err(|e| ExecError::io(&logs_dir, e))?;
        let out_path = logs_dir.join("stdout");
        let err_path = logs_dir.join("stderr");
        let stdout = File::create(&out_path).map_err(|e| ExecError::io(&out_path, e))?;
        let stderr = File::create(&err_path).map_err(|e| ExecError::io(&err_path, e))?;
        let mut child = Command::new(program)
            .args(args)
            .current_dir(case_dir)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .spawn()
            .map_err(|e| ExecError::SpawnFailure(format!("{program}: {e}")))?;
        let status = match child.wait_timeout(self.budget).map_err(|e| ExecError::SpawnFailure(e.to_string()))? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(ExecError::Timeout { budget_secs: self.budget.as_secs() });
            }
        };
        let mut logs = BTreeMap::new();
        for (key, p) in [("stdout", &out_path), ("stderr", &err_path)] {
            let text = fs::read_to_string(p).unwrap_or_default();
            if !text.is_empty() {
                logs.insert(key.to_string(), text);
            }
        }
        let mut entries: Vec<_> = fs::read_dir(case_dir).map_err(|e| ExecError::io(case_dir, e))?.flatten().collect();
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let file_name = e.file_name().to_string_lossy().into_owned();
            if file_name.starts_with("log.") && e.path().is_file() {
                logs.insert(file_name, String::from_utf8_lossy(&fs::read(e.path()).unwrap_or_default()).into_owned());
            }
        }
        // A signal-terminated child has no code; report it as -1.
        let exit_codes = BTreeMap::from([(name.to_string(), status.code().unwrap_or(-1))]);
        let result = ExecutionResult::from_parts(logs, exit_codes);
        persist_logs(case_dir, &result)?;
        Ok(result)
    }
}

impl Executor for LocalExecutor {
    fn prepare(&self, case_dir: &Path) -> Result<(), ExecError> {
        let entries = fs::read_dir(case_dir).map_err(|e| ExecError::io(case_dir, e))?;
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            let p = e.path();
            let res = if p.is_dir() && (name == "logs" || name.starts_with("processor")) {
                fs::remove_dir_all(&p)
            } else if p.is_file() && name.starts_with("log.") {
                fs::remove_file(&p)
            } else {
                Ok(())
            };
            res.map_err(|err| ExecError::io(&p, err))?;
        }
        Ok(())
    }

    fn run(&self, case_dir: &Path) -> Result<ExecutionResult, ExecError> {
        let allrun = case_dir.join("Allrun");
        if !allrun.is_file() {
            return Err(ExecError::SpawnFailure(format!("{} does not exist", allrun.display())));
        }
        self.exec(case_dir, "sh", &["./Allrun"], "Allrun")
    }

    fn run_script(&self, case_dir: &Path, script: &str) -> Result<ExecutionResult, ExecError> {
        let program = if script.ends_with(".py") { "python3" } else { "sh" };
        let path = format!("./{script}");
        self.exec(case_dir, program, &[&path], script)
    }
}
