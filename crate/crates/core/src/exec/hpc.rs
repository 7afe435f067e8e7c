use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ExecError, ExecStatus, ExecutionResult, Executor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Completed,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Completed | JobState::Failed)
    }
}

/// Batch scheduler client. Polls may come from several threads.
pub trait Submitter: Send + Sync {
    fn submit(&self, script_text: &str, work_dir: &Path) -> Result<String, ExecError>;
    fn status(&self, job_id: &str) -> Result<JobState, ExecError>;
}

impl<T: Submitter + ?Sized> Submitter for std::sync::Arc<T> {
    fn submit(&self, script_text: &str, work_dir: &Path) -> Result<String, ExecError> {
        (**self).submit(script_text, work_dir)
    }

    fn status(&self, job_id: &str) -> Result<JobState, ExecError> {
        (**self).status(job_id)
    }
}

#[derive(Debug)]
struct StubJob {
    polls: usize,
    fails: bool,
}

/// In-memory scheduler. Poll `k` (0-based) reports stage `min(k * advance, 2)`
/// of pending, running, finished; the finished stage is `Failed` for jobs
/// submitted while [`StubSubmitter::fail_next`] was armed.
#[derive(Debug)]
pub struct StubSubmitter {
    advance_per_poll: usize,
    jobs: Mutex<HashMap<String, StubJob>>,
    next_id: Mutex<u64>,
    fail_next: Mutex<bool>,
    scripts: Mutex<Vec<String>>,
}

impl StubSubmitter {
    pub fn new(advance_per_poll: usize) -> Self {
        StubSubmitter {
            advance_per_poll,
            jobs: Mutex::new(HashMap::new()),
            next_id: Mutex::new(1),
            fail_next: Mutex::new(false),
            scripts: Mutex::new(Vec::new()),
        }
    }

    pub fn fail_next(&self) {
        *self.fail_next.lock().unwrap() = true;
    }

    pub fn submitted_scripts(&self) -> Vec<String> {
        self.scripts.lock().unwrap().clone()
    }
}

impl Default for StubSubmitter {
    fn default() -> Self {
        Self::new(1)
    }
}

impl Submitter for StubSubmitter {
    fn submit(&self, script_text: &str, _work_dir: &Path) -> Result<String, ExecError> {
        let mut next = self.next_id.lock().unwrap();
        let id = next.to_string();
        *next += 1;
        let fails = std::mem::take(&mut *self.fail_next.lock().unwrap());
        self.jobs.lock().unwrap().insert(id.clone(), StubJob { polls: 0, fails });
        self.scripts.lock().unwrap().push(script_text.to_string());
        Ok(id)
    }

    fn status(&self, job_id: &str) -> Result<JobState, ExecError> {
        let mut jobs = self.jobs.lock().unwrap();
        let job = jobs.get_mut(job_id).ok_or_else(|| ExecError::UnknownJob(job_id.to_string()))?;
        let stage = (job.polls * self.advance_per_poll).min(2);
        job.polls += 1;
        Ok(match stage {
            0 => JobState::Pending,
            1 => JobState::Running,
            _ if job.fails => JobState::Failed,
            _ => JobState::Completed,
        })
    }
}

/// Extracts the job id from `sbatch` output (`Submitted batch job 12345`).
pub fn parse_sbatch_output(stdout: &str) -> Option<String> {
    stdout.lines().find_map(|l| {
        let id = l.trim().strip_prefix("Submitted batch job")?.trim();
        (!id.is_empty() && id.chars().all(|c| c.is_ascii_digit())).then(|| id.to_string())
    })
}

/// Maps a `squeue -h -o %T` state. Empty output means the job left the queue.
pub fn parse_squeue_state(stdout: &str) -> Option<JobState> {
    let s = stdout.lines().map(str::trim).find(|l| !l.is_empty())?;
    Some(match s {
        "PENDING" | "CONFIGURING" | "REQUEUED" | "SUSPENDED" => JobState::Pending,
        "COMPLETED" => JobState::Completed,
        "FAILED" | "CANCELLED" | "TIMEOUT" | "NODE_FAIL" | "OUT_OF_MEMORY" | "BOOT_FAIL" | "DEADLINE" | "PREEMPTED" => {
            JobState::Failed
        }
        _ => JobState::Running,
    })
}

/// Maps the first `sacct -n -X -o State` line of a finished job.
pub fn parse_sacct_state(stdout: &str) -> Option<JobState> {
    let s = stdout.lines().map(str::trim).find(|l| !l.is_empty())?;
    let word = s.split_whitespace().next()?;
    Some(match word {
        "COMPLETED" => JobState::Completed,
        "PENDING" => JobState::Pending,
        "RUNNING" | "COMPLETING" => JobState::Running,
        _ => JobState::Failed,
    })
}

/// Shells out to `sbatch`, `squeue` and `sacct`.
#[derive(Debug, Clone)]
pub struct SlurmSubmitter {
    pub sbatch: String,
    pub squeue: String,
    pub sacct: String,
}

impl Default for SlurmSubmitter {
    fn default() -> Self {
        SlurmSubmitter { sbatch: "sbatch".into(), squeue: "squeue".into(), sacct: "sacct".into() }
    }
}

fn run_capture(program: &str, args: &[&str], dir: Option<&Path>) -> Result<String, ExecError> {
    let mut cmd = Command::new(program);
    cmd.args(args);
    if let Some(d) = dir {
        cmd.current_dir(d);
    }
    let out = cmd.output().map_err(|e| ExecError::SpawnFailure(format!("{program}: {e}")))?;
    if !out.status.success() {
        return Err(ExecError::Scheduler(format!("{program} failed: {}", String::from_utf8_lossy(&out.stderr).trim())));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

impl Submitter for SlurmSubmitter {
    fn submit(&self, script_text: &str, work_dir: &Path) -> Result<String, ExecError> {
        let path = work_dir.join("submit.slurm");
        std::fs::write(&path, script_text).map_err(|e| ExecError::io(&path, e))?;
        let out = run_capture(&self.sbatch, &["submit.slurm"], Some(work_dir))?;
        parse_sbatch_output(&out).ok_or_else(|| ExecError::Scheduler(format!("unexpected sbatch output: {}", out.trim())))
    }

    fn status(&self, job_id: &str) -> Result<JobState, ExecError> {
        let q = run_capture(&self.squeue, &["-h", "-j", job_id, "-o", "%T"], None).unwrap_or_default();
        if let Some(s) = parse_squeue_state(&q) {
            return Ok(s);
        }
        let a = run_capture(&self.sacct, &["-j", job_id, "-n", "-X", "-o", "State"], None)?;
        parse_sacct_state(&a).ok_or_else(|| ExecError::UnknownJob(job_id.to_string()))
    }
}

/// Submits a batch script that runs `Allrun`, polls until the job ends, then
/// collects the `log.*` files the job left in the case directory.
pub struct HpcExecutor<S: Submitter> {
    pub submitter: S,
    pub script: String,
    pub poll_interval: Duration,
    pub max_polls: usize,
}

impl<S: Submitter> HpcExecutor<S> {
    pub fn new(submitter: S, script: String) -> Self {
        HpcExecutor { submitter, script, poll_interval: Duration::from_secs(30), max_polls: 2880 }
    }

    fn wait(&self, job: &str) -> Result<JobState, ExecError> {
        for _ in 0..self.max_polls {
            let s = self.submitter.status(job)?;
            if s.is_terminal() {
                return Ok(s);
            }
            std::thread::sleep(self.poll_interval);
        }
        Err(ExecError::Timeout { budget_secs: self.poll_interval.as_secs() * self.max_polls as u64 })
    }

    fn collect(&self, case_dir: &Path, name: &str, state: JobState) -> Result<ExecutionResult, ExecError> {
        let mut logs = BTreeMap::new();
        let mut entries: Vec<_> = std::fs::read_dir(case_dir).map_err(|e| ExecError::io(case_dir, e))?.flatten().collect();
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let n = e.file_name().to_string_lossy().into_owned();
            if (n.starts_with("log.") || n.starts_with("slurm-")) && e.path().is_file() {
                logs.insert(n, std::fs::read_to_string(e.path()).unwrap_or_default());
            }
        }
        let code = if state == JobState::Completed { 0 } else { 1 };
        let mut r = ExecutionResult::from_parts(logs, BTreeMap::from([(name.to_string(), code)]));
        if state == JobState::Failed {
            r.status = ExecStatus::Failure;
        }
        Ok(r)
    }
}

impl<S: Submitter> Executor for HpcExecutor<S> {
    fn prepare(&self, case_dir: &Path) -> Result<(), ExecError> {
        super::LocalExecutor::force_enabled(Duration::from_secs(1)).prepare(case_dir)
    }

    fn run(&self, case_dir: &Path) -> Result<ExecutionResult, ExecError> {
        let job = self.submitter.submit(&self.script, case_dir)?;
        let state = self.wait(&job)?;
        self.collect(case_dir, "Allrun", state)
    }

    fn run_script(&self, case_dir: &Path, script: &str) -> Result<ExecutionResult, ExecError> {
        let text = self.script.replace("./Allrun", &format!("./{script}"));
        let job = self.submitter.submit(&text, case_dir)?;
        let state = self.wait(&job)?;
        self.collect(case_dir, script, state)
    }
}
