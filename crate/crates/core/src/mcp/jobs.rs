use std::collections::BTreeMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Mesh,
    Simulation,
    Visualization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Running,
    Succeeded,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Succeeded | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub kind: JobKind,
    pub case_id: String,
    pub status: JobStatus,
    pub result_summary: Value,
    /// Logs the job captured, keyed by log name.
    #[serde(skip)]
    pub logs: BTreeMap<String, String>,
}

/// What a job's work reports back.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutput {
    pub succeeded: bool,
    pub summary: Value,
    pub logs: BTreeMap<String, String>,
}

pub type JobWork = Box<dyn FnOnce() -> JobOutput + Send>;

/// How queued work gets executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobMode {
    /// A pool of this many background threads runs jobs as soon as they are queued.
    Workers(usize),
    /// Nothing runs on its own. Each [`JobStore::advance`] moves a job one
    /// step: pending to running, then running to finished (executing the work).
    Stepped,
}

struct Inner {
    records: RwLock<BTreeMap<String, (u64, JobRecord)>>,
    work: Mutex<BTreeMap<String, JobWork>>,
    seq: Mutex<u64>,
    finished: (Mutex<()>, Condvar),
}

pub struct JobStore {
    inner: Arc<Inner>,
    mode: JobMode,
    queue: Option<Mutex<Sender<String>>>,
}

impl JobStore {
    pub fn new(mode: JobMode) -> Self {
        let inner = Arc::new(Inner {
            records: RwLock::new(BTreeMap::new()),
            work: Mutex::new(BTreeMap::new()),
            seq: Mutex::new(0),
            finished: (Mutex::new(()), Condvar::new()),
        });
        let queue = match mode {
            JobMode::Stepped => None,
            JobMode::Workers(n) => {
                let (tx, rx) = channel::<String>();
                let rx = Arc::new(Mutex::new(rx));
                for _ in 0..n.max(1) {
                    let inner = Arc::clone(&inner);
                    let rx = Arc::clone(&rx);
                    std::thread::spawn(move || worker(&inner, &rx));
                }
                Some(Mutex::new(tx))
            }
        };
        JobStore { inner, mode, queue }
    }

    pub fn mode(&self) -> JobMode {
        self.mode
    }

    /// Records a pending job and hands its work to the pool (or keeps it for
    /// stepping). Returns the new job id.
    pub fn enqueue(&self, kind: JobKind, case_id: &str, work: JobWork) -> String {
        let job_id = format!("job-{}", &uuid::Uuid::new_v4().simple().to_string()[..12]);
        let seq = {
            let mut s = self.inner.seq.lock().expect("job sequence");
            *s += 1;
            *s
        };
        let record = JobRecord {
            job_id: job_id.clone(),
            kind,
            case_id: case_id.to_string(),
            status: JobStatus::Pending,
            result_summary: Value::Object(Default::default()),
            logs: BTreeMap::new(),
        };
        self.inner.records.write().expect("job records").insert(job_id.clone(), (seq, record));
        self.inner.work.lock().expect("job work").insert(job_id.clone(), work);
        if let Some(q) = &self.queue {
            q.lock().expect("job queue").send(job_id.clone()).expect("job workers are alive");
        }
        job_id
    }

    /// Performs the job's next transition and returns its new status.
    pub fn advance(&self, job_id: &str) -> Option<JobStatus> {
        advance(&self.inner, job_id)
    }

    pub fn get(&self, job_id: &str) -> Option<JobRecord> {
        self.inner.records.read().expect("job records").get(job_id).map(|(_, r)| r.clone())
    }

    /// Jobs in submission order, optionally only those of one case.
    pub fn list(&self, case_id: Option<&str>) -> Vec<JobRecord> {
        let records = self.inner.records.read().expect("job records");
        let mut out: Vec<&(u64, JobRecord)> =
            records.values().filter(|(_, r)| case_id.map_or(true, |c| r.case_id == c)).collect();
        out.sort_by_key(|(seq, _)| *seq);
        out.into_iter().map(|(_, r)| r.clone()).collect()
    }

    /// Blocks until the job finishes or `timeout` passes. In stepped mode
    /// the job is advanced to completion instead.
    pub fn wait(&self, job_id: &str, timeout: Duration) -> Option<JobRecord> {
        if self.mode == JobMode::Stepped {
            while !self.get(job_id)?.status.is_terminal() {
                self.advance(job_id);
            }
            return self.get(job_id);
        }
        let deadline = Instant::now() + timeout;
        let (lock, cv) = &self.inner.finished;
        let mut guard = lock.lock().expect("job signal");
        loop {
            let r = self.get(job_id)?;
            let now = Instant::now();
            if r.status.is_terminal() || now >= deadline {
                return Some(r);
            }
            guard = cv.wait_timeout(guard, deadline - now).expect("job signal").0;
        }
    }
}

fn set_status(inner: &Inner, job_id: &str, f: impl FnOnce(&mut JobRecord)) -> Option<JobStatus> {
    let mut records = inner.records.write().expect("job records");
    let (_, r) = records.get_mut(job_id)?;
    f(r);
    Some(r.status)
}

fn advance(inner: &Inner, job_id: &str) -> Option<JobStatus> {
    let status = inner.records.read().expect("job records").get(job_id)?.1.status;
    match status {
        JobStatus::Pending => set_status(inner, job_id, |r| r.status = JobStatus::Running),
        JobStatus::Running => {
            let Some(work) = inner.work.lock().expect("job work").remove(job_id) else {
                // Another thread is executing it.
                return Some(JobStatus::Running);
            };
            // The work runs without holding the record lock so readers never block on it.
            let out = work();
            let status = set_status(inner, job_id, |r| {
                r.status = if out.succeeded { JobStatus::Succeeded } else { JobStatus::Failed };
                r.result_summary = out.summary;
                r.logs = out.logs;
            });
            let (lock, cv) = &inner.finished;
            let _guard = lock.lock().expect("job signal");
            cv.notify_all();
            status
        }
        terminal => Some(terminal),
    }
}

fn worker(inner: &Inner, rx: &Mutex<Receiver<String>>) {
    loop {
        let next = rx.lock().expect("job queue").recv();
        let Ok(job_id) = next else { return };
        while let Some(s) = advance(inner, &job_id) {
            if s.is_terminal() {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn done(ok: bool) -> JobWork {
        Box::new(move || JobOutput { succeeded: ok, summary: json!({ "ok": ok }), logs: BTreeMap::new() })
    }

    #[test]
    fn stepped_jobs_move_one_state_per_advance() {
        let store = JobStore::new(JobMode::Stepped);
        let id = store.enqueue(JobKind::Simulation, "c1", done(true));
        assert_eq!(store.get(&id).unwrap().status, JobStatus::Pending);
        assert_eq!(store.advance(&id), Some(JobStatus::Running));
        assert_eq!(store.advance(&id), Some(JobStatus::Succeeded));
        assert_eq!(store.advance(&id), Some(JobStatus::Succeeded));
        assert_eq!(store.get(&id).unwrap().result_summary, json!({ "ok": true }));
        let failing = store.enqueue(JobKind::Mesh, "c1", done(false));
        assert_eq!(store.wait(&failing, Duration::ZERO).unwrap().status, JobStatus::Failed);
        assert!(store.advance("job-missing").is_none());
    }

    #[test]
    fn list_filters_by_case_in_submission_order() {
        let store = JobStore::new(JobMode::Stepped);
        let a = store.enqueue(JobKind::Mesh, "c1", done(true));
        let _ = store.enqueue(JobKind::Mesh, "c2", done(true));
        let c = store.enqueue(JobKind::Simulation, "c1", done(true));
        let ids: Vec<String> = store.list(Some("c1")).into_iter().map(|r| r.job_id).collect();
        assert_eq!(ids, [a, c]);
        assert_eq!(store.list(None).len(), 3);
    }

    #[test]
    fn workers_run_jobs_in_the_background() {
        let store = JobStore::new(JobMode::Workers(2));
        let (release, gate) = std::sync::mpsc::channel::<()>();
        let id = store.enqueue(
            JobKind::Simulation,
            "c1",
            Box::new(move || {
                gate.recv().unwrap();
                JobOutput { succeeded: true, summary: json!({}), logs: BTreeMap::new() }
            }),
        );
        let early = store.get(&id).unwrap().status;
        assert!(matches!(early, JobStatus::Pending | JobStatus::Running), "{early:?}");
        release.send(()).unwrap();
        assert_eq!(store.wait(&id, Duration::from_secs(10)).unwrap().status, JobStatus::Succeeded);
    }
}
