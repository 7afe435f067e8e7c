use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::Node;
use crate::exec::{ExecError, ExecutionResult, Executor};
use crate::llm::{CompletionRequest, CompletionResult, Embedder, LlmError, Provider};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o on {path}: {message}")]
    Io { path: String, message: String },
    #[error("trace line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Entered,
    ProviderCall,
    ExecutorCall,
    StateDelta,
    Exited,
}

/// One trace record. `timestamp` is a logical clock (the event's position
/// in the stream) so that identical runs produce identical traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub timestamp: u64,
    pub node: Node,
    pub event_kind: EventKind,
    #[serde(default)]
    pub payload: Value,
}

/// Hex SHA-256 of the request's canonical JSON form.
pub fn request_hash(req: &CompletionRequest) -> String {
    let text = serde_json::to_string(req).expect("request serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

struct Sink {
    path: PathBuf,
    file: File,
}

/// Append-only event log, optionally mirrored line by line to an NDJSON file.
pub struct TraceLog {
    events: Mutex<Vec<TraceEvent>>,
    node: Mutex<Node>,
    sink: Mutex<Option<Sink>>,
}

impl Default for TraceLog {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl TraceLog {
    pub fn in_memory() -> Self {
        TraceLog { events: Mutex::new(Vec::new()), node: Mutex::new(Node::Architect), sink: Mutex::new(None) }
    }

    /// Starts a fresh trace file at `path`, replacing any earlier one.
    pub fn to_file(path: &Path) -> Result<Self, TraceError> {
        let io = |e: std::io::Error| TraceError::Io { path: path.display().to_string(), message: e.to_string() };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let file = File::create(path).map_err(io)?;
        let log = Self::in_memory();
        *log.sink.lock().expect("trace sink") = Some(Sink { path: path.to_path_buf(), file });
        Ok(log)
    }

    pub fn set_node(&self, node: Node) {
        *self.node.lock().expect("trace node") = node;
    }

    pub fn current_node(&self) -> Node {
        *self.node.lock().expect("trace node")
    }

    pub fn record(&self, event_kind: EventKind, payload: Value) -> Result<(), TraceError> {
        let node = self.current_node();
        let mut events = self.events.lock().expect("trace events");
        let event = TraceEvent { timestamp: events.len() as u64, node, event_kind, payload };
        if let Some(sink) = self.sink.lock().expect("trace sink").as_mut() {
            let line = serde_json::to_string(&event).expect("event serializes");
            writeln!(sink.file, "{line}")
                .and_then(|_| sink.file.flush())
                .map_err(|e| TraceError::Io { path: sink.path.display().to_string(), message: e.to_string() })?;
        }
        events.push(event);
        Ok(())
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.events.lock().expect("trace events").clone()
    }
}

/// Reads a persisted trace back.
pub fn replay(path: &Path) -> Result<Vec<TraceEvent>, TraceError> {
    let file = File::open(path).map_err(|e| TraceError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| TraceError::Io { path: path.display().to_string(), message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| TraceError::Malformed { line: i + 1, message: e.to_string() })?;
        out.push(event);
    }
    Ok(out)
}

pub fn node_sequence(events: &[TraceEvent]) -> Vec<Node> {
    events.iter().filter(|e| e.event_kind == EventKind::Entered).map(|e| e.node).collect()
}

pub fn request_hashes(events: &[TraceEvent]) -> Vec<String> {
    events
        .iter()
        .filter(|e| e.event_kind == EventKind::ProviderCall)
        .filter_map(|e| e.payload.get("request_hash").and_then(Value::as_str).map(str::to_string))
        .collect()
}

/// Provider wrapper that records every completion on a trace.
pub struct TracingProvider<'a> {
    pub inner: &'a dyn Provider,
    pub trace: &'a TraceLog,
}

impl Embedder for TracingProvider<'_> {
    fn embed(&self, text: &str) -> Result<Vec<f32>, LlmError> {
        self.inner.embed(text)
    }
}

impl Provider for TracingProvider<'_> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let out = self.inner.complete(req);
        let mut payload = json!({ "template_id": req.template_id, "request_hash": request_hash(req) });
        match &out {
            Ok(r) => {
                payload["prompt_tokens"] = json!(r.prompt_tokens);
                payload["completion_tokens"] = json!(r.completion_tokens);
            }
            Err(e) => payload["error"] = json!(e.to_string()),
        }
        // A trace write failure must not change the completion's outcome.
        let _ = self.trace.record(EventKind::ProviderCall, payload);
        out
    }
}

/// Executor wrapper that records every call on a trace. Paths are left out
/// so traces do not depend on where the workspace lives.
pub struct TracingExecutor<'a> {
    pub inner: &'a dyn Executor,
    pub trace: &'a TraceLog,
}

impl TracingExecutor<'_> {
    fn note(&self, op: &str, script: Option<&str>, out: &Result<ExecutionResult, ExecError>) {
        let mut payload = json!({ "op": op });
        if let Some(s) = script {
            payload["script"] = json!(s);
        }
        match out {
            Ok(r) => {
                payload["status"] = json!(r.status);
                payload["exit_codes"] = json!(r.exit_codes);
                payload["logs"] = json!(r.logs.keys().collect::<Vec<_>>());
            }
            Err(e) => payload["error"] = json!(e.to_string()),
        }
        let _ = self.trace.record(EventKind::ExecutorCall, payload);
    }
}

impl Executor for TracingExecutor<'_> {
    fn prepare(&self, case_dir: &Path) -> Result<(), ExecError> {
        let out = self.inner.prepare(case_dir);
        let payload = match &out {
            Ok(()) => json!({ "op": "prepare" }),
            Err(e) => json!({ "op": "prepare", "error": e.to_string() }),
        };
        let _ = self.trace.record(EventKind::ExecutorCall, payload);
        out
    }

    fn run(&self, case_dir: &Path) -> Result<ExecutionResult, ExecError> {
        let out = self.inner.run(case_dir);
        self.note("run", None, &out);
        out
    }

    fn run_script(&self, case_dir: &Path, script: &str) -> Result<ExecutionResult, ExecError> {
        let out = self.inner.run_script(case_dir, script);
        self.note("run_script", Some(script), &out);
        out
    }
}
