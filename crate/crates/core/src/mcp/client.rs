//! A minimal client for the wire protocol that keeps a transcript of the
//! exact frames exchanged, plus a scripted session that drives a whole
//! repair cycle through tool calls alone.

use std::io::{self, BufRead, Write};

use serde_json::{json, Value};

use super::wire::{read_frame, write_frame, Framing};

pub struct WireClient<R: BufRead, W: Write> {
    reader: R,
    writer: W,
    framing: Framing,
    next_id: u64,
    transcript: String,
}

fn framed(framing: Framing, body: &str) -> String {
    let mut buf = Vec::new();
    write_frame(&mut buf, framing, body).expect("writing to memory");
    String::from_utf8(buf).expect("frames are utf-8")
}

fn protocol_error(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

impl<R: BufRead, W: Write> WireClient<R, W> {
    pub fn new(reader: R, writer: W, framing: Framing) -> Self {
        WireClient { reader, writer, framing, next_id: 1, transcript: String::new() }
    }

    /// Every frame sent and received, each under a `--> client` or
    /// `<-- server` line and followed by a newline.
    pub fn transcript(&self) -> &str {
        &self.transcript
    }

    /// Sends raw text as one frame.
    pub fn send_raw(&mut self, body: &str) -> io::Result<()> {
        self.transcript.push_str("--> client\n");
        self.transcript.push_str(&framed(self.framing, body));
        if self.framing == Framing::ContentLength {
            self.transcript.push('\n');
        }
        write_frame(&mut self.writer, self.framing, body)
    }

    pub fn receive(&mut self) -> io::Result<Value> {
        let (framing, body) = read_frame(&mut self.reader)?.ok_or_else(|| protocol_error("server closed the stream".into()))?;
        self.transcript.push_str("<-- server\n");
        self.transcript.push_str(&framed(framing, &body));
        if framing == Framing::ContentLength {
            self.transcript.push('\n');
        }
        serde_json::from_str(&body).map_err(|e| protocol_error(format!("server sent invalid json: {e}")))
    }

    /// Sends raw text and reads the single reply.
    pub fn exchange_raw(&mut self, body: &str) -> io::Result<Value> {
        self.send_raw(body)?;
        self.receive()
    }

    pub fn request(&mut self, method: &str, params: Value) -> io::Result<Value> {
        let id = self.next_id;
        self.next_id += 1;
        let reply = self.exchange_raw(&json!({ "jsonrpc": "2.0", "id": id, "method": method, "params": params }).to_string())?;
        if reply["id"] != json!(id) {
            return Err(protocol_error(format!("reply id {} does not match request id {id}", reply["id"])));
        }
        Ok(reply)
    }

    pub fn notify(&mut self, method: &str, params: Value) -> io::Result<()> {
        self.send_raw(&json!({ "jsonrpc": "2.0", "method": method, "params": params }).to_string())
    }

    /// `Ok` with the tool's structured result, or `Err` with the error object.
    pub fn call_tool(&mut self, name: &str, arguments: Value) -> io::Result<Result<Value, Value>> {
        let reply = self.request("tools/call", json!({ "name": name, "arguments": arguments }))?;
        Ok(match reply.get("error") {
            Some(e) => Err(e.clone()),
            None => Ok(reply["result"]["structuredContent"].clone()),
        })
    }

    fn tool(&mut self, name: &str, arguments: Value) -> io::Result<Value> {
        self.call_tool(name, arguments)?.map_err(|e| protocol_error(format!("{name} failed: {e}")))
    }

    /// Polls until the job finishes; returns every status seen.
    pub fn poll_job(&mut self, job_id: &str, max_polls: usize) -> io::Result<Vec<String>> {
        let mut seen = Vec::new();
        for _ in 0..max_polls {
            let s = self.tool("check_job_status", json!({ "job_id": job_id }))?;
            let status = s["status"]["status"].as_str().unwrap_or_default().to_string();
            let done = status == "succeeded" || status == "failed";
            seen.push(status);
            if done {
                return Ok(seen);
            }
        }
        Err(protocol_error(format!("job {job_id} did not finish within {max_polls} polls")))
    }
}

/// What a scripted repair session observed.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub case_id: String,
    pub job_ids: Vec<String>,
    /// Statuses seen while polling each run, in order.
    pub polls: Vec<Vec<String>>,
    pub planned_files: usize,
    pub corrected_files: usize,
}

/// Handshake, tool listing, then create, plan, generate every planned file,
/// run, poll, fetch logs, review, apply the fix and run again, stopping at
/// the first successful run (after at most `max_repairs` fixes).
pub fn repair_session<R: BufRead, W: Write>(
    client: &mut WireClient<R, W>,
    prompt: &str,
    max_repairs: usize,
) -> io::Result<SessionReport> {
    client.request("initialize", json!({ "protocolVersion": super::wire::PROTOCOL_VERSION, "capabilities": {}, "clientInfo": { "name": "scripted-session", "version": "1" } }))?;
    client.notify("notifications/initialized", json!({}))?;
    client.request("tools/list", json!({}))?;

    let case_id = client.tool("create_case", json!({ "user_prompt": prompt }))?["case_id"].as_str().unwrap_or_default().to_string();
    let plan = client.tool("plan_simulation_structure", json!({ "case_id": case_id }))?;
    let entries = plan["plan"].as_array().cloned().unwrap_or_default();
    for e in &entries {
        client.tool("generate_file_content", json!({ "case_id": case_id, "file": e["file"], "folder": e["folder"] }))?;
    }
    let mut report = SessionReport { case_id: case_id.clone(), job_ids: Vec::new(), polls: Vec::new(), planned_files: entries.len(), corrected_files: 0 };
    for attempt in 0..=max_repairs {
        let job = client.tool("run_simulation", json!({ "case_id": case_id, "environment": "local" }))?["job_id"].as_str().unwrap_or_default().to_string();
        let seen = client.poll_job(&job, 10)?;
        report.job_ids.push(job.clone());
        let ok = seen.last().map(String::as_str) == Some("succeeded");
        report.polls.push(seen);
        if ok || attempt == max_repairs {
            break;
        }
        let logs = client.tool("get_simulation_logs", json!({ "case_id": case_id, "job_id": job }))?;
        let fix = client.tool("review_and_suggest_fix", json!({ "case_id": case_id, "logs": logs["logs"] }))?;
        let mods = fix["suggestions"]["modifications"].clone();
        report.corrected_files += mods.as_array().map_or(0, Vec::len);
        client.tool("apply_fix", json!({ "case_id": case_id, "modifications": mods }))?;
    }
    Ok(report)
}

/// Requests that must each come back as a structured error.
pub const MALFORMED_REQUESTS: [&str; 8] = [
    "{\"jsonrpc\": \"2.0\", \"id\": 90, \"method\": ",
    "{\"id\": 91, \"method\": \"tools/list\"}",
    "{\"jsonrpc\": \"2.0\", \"id\": 92, \"method\": \"resources/list\"}",
    "{\"jsonrpc\": \"2.0\", \"id\": 93, \"method\": \"tools/call\", \"params\": {\"name\": \"delete_case\", \"arguments\": {}}}",
    "{\"jsonrpc\": \"2.0\", \"id\": 94, \"method\": \"tools/call\", \"params\": {\"name\": \"create_case\", \"arguments\": {}}}",
    "{\"jsonrpc\": \"2.0\", \"id\": 95, \"method\": \"tools/call\", \"params\": {\"name\": \"check_job_status\", \"arguments\": {\"job_id\": \"job-missing\"}}}",
    "{\"jsonrpc\": \"2.0\", \"id\": 96, \"method\": \"tools/call\", \"params\": {\"name\": \"plan_simulation_structure\", \"arguments\": {\"case_id\": \"case-missing\"}}}",
    "{\"jsonrpc\": \"2.0\", \"id\": 97, \"method\": \"tools/call\", \"params\": {\"name\": \"apply_fix\", \"arguments\": {\"case_id\": \"x\", \"modifications\": [{\"file\": \"U\", \"folder\": \"0\"}]}}}",
];
