use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpListener, ToSocketAddrs};
use std::sync::Arc;

use serde_json::{json, Value};

use super::McpService;

pub const PROTOCOL_VERSION: &str = "2024-11-05";

/// How a message was delimited; replies use the same framing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Framing {
    /// `Content-Length: N` header block, blank line, then N bytes.
    ContentLength,
    /// One JSON document per line.
    Line,
}

/// Reads the next message. Returns `None` at end of input.
pub fn read_frame(reader: &mut impl BufRead) -> io::Result<Option<(Framing, String)>> {
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        if !line.trim().is_empty() {
            break;
        }
    }
    let header = line.split_once(':').filter(|(n, _)| n.trim().eq_ignore_ascii_case("content-length"));
    let Some(value) = header.map(|(_, v)| v.trim().to_string()) else {
        return Ok(Some((Framing::Line, line.trim_end_matches(['\r', '\n']).to_string())));
    };
    let length: usize = value
        .parse()
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("bad Content-Length '{value}'")))?;
    // Any further headers end at the first blank line.
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line.trim().is_empty() {
            break;
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    Ok(Some((Framing::ContentLength, String::from_utf8_lossy(&body).into_owned())))
}

pub fn write_frame(writer: &mut impl Write, framing: Framing, body: &str) -> io::Result<()> {
    match framing {
        Framing::ContentLength => write!(writer, "Content-Length: {}\r\n\r\n{body}", body.len())?,
        Framing::Line => writeln!(writer, "{body}")?,
    }
    writer.flush()
}

fn error(id: Value, code: i64, message: &str, data: Value) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "error": { "code": code, "message": message, "data": data } })
}

fn invalid_request(id: Value, detail: &str) -> Value {
    error(id, -32600, "invalid request", json!({ "kind": "invalid_request", "detail": detail }))
}

/// Turns JSON-RPC requests into tool calls on a service.
pub struct Dispatcher<'a> {
    pub service: &'a McpService,
}

impl Dispatcher<'_> {
    /// Handles one raw message; `None` when nothing should be sent back
    /// (notifications, or a batch made only of notifications).
    pub fn handle_text(&self, text: &str) -> Option<String> {
        let reply = match serde_json::from_str::<Value>(text) {
            Err(e) => Some(error(Value::Null, -32700, "parse error", json!({ "kind": "parse_error", "detail": e.to_string() }))),
            Ok(Value::Array(batch)) if batch.is_empty() => Some(invalid_request(Value::Null, "empty batch")),
            Ok(Value::Array(batch)) => {
                let replies: Vec<Value> = batch.iter().filter_map(|m| self.handle(m)).collect();
                (!replies.is_empty()).then(|| Value::Array(replies))
            }
            Ok(message) => self.handle(&message),
        };
        reply.map(|r| r.to_string())
    }

    pub fn handle(&self, message: &Value) -> Option<Value> {
        let Some(obj) = message.as_object() else {
            return Some(invalid_request(Value::Null, "a request must be an object"));
        };
        let id = obj.get("id").cloned();
        let reply_id = id.clone().unwrap_or(Value::Null);
        if !matches!(reply_id, Value::Null | Value::String(_) | Value::Number(_)) {
            return Some(invalid_request(Value::Null, "id must be a string, number or null"));
        }
        if obj.get("jsonrpc").and_then(Value::as_str) != Some("2.0") {
            return Some(invalid_request(reply_id, "jsonrpc must be \"2.0\""));
        }
        let Some(method) = obj.get("method").and_then(Value::as_str) else {
            return Some(invalid_request(reply_id, "method must be a string"));
        };
        let params = obj.get("params").cloned().unwrap_or(Value::Null);
        let outcome = self.call(method, &params);
        // Notifications get no reply, errors included.
        id.as_ref()?;
        Some(match outcome {
            Ok(result) => json!({ "jsonrpc": "2.0", "id": reply_id, "result": result }),
            Err((code, message, data)) => error(reply_id, code, &message, data),
        })
    }

    fn call(&self, method: &str, params: &Value) -> Result<Value, (i64, String, Value)> {
        let bad_params = |detail: &str| (-32602, "invalid params".to_string(), json!({ "kind": "invalid_params", "detail": detail }));
        match method {
            "initialize" => Ok(json!({
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": { "tools": { "listChanged": false } },
                "serverInfo": { "name": "foamforge", "version": env!("CARGO_PKG_VERSION") },
            })),
            "notifications/initialized" | "ping" => Ok(json!({})),
            "tools/list" => Ok(json!({ "tools": self.service.tools() })),
            "tools/call" => {
                let name = params.get("name").and_then(Value::as_str).ok_or_else(|| bad_params("params.name must be a string"))?;
                let args = match params.get("arguments") {
                    None | Some(Value::Null) => json!({}),
                    Some(a @ Value::Object(_)) => a.clone(),
                    Some(_) => return Err(bad_params("params.arguments must be an object")),
                };
                match self.service.handle_call(name, &args) {
                    Ok(result) => Ok(json!({
                        "content": [{ "type": "text", "text": result.to_string() }],
                        "structuredContent": result,
                        "isError": false,
                    })),
                    Err(e) => Err((e.code(), e.to_string(), e.data())),
                }
            }
            other => Err((-32601, "method not found".to_string(), json!({ "kind": "method_not_found", "method": other }))),
        }
    }
}

/// Serves requests from `reader` until end of input, one at a time.
pub fn serve_stream(service: &McpService, reader: impl Read, mut writer: impl Write) -> io::Result<()> {
    let dispatcher = Dispatcher { service };
    let mut reader = BufReader::new(reader);
    while let Some((framing, text)) = read_frame(&mut reader)? {
        if let Some(reply) = dispatcher.handle_text(&text) {
            write_frame(&mut writer, framing, &reply)?;
        }
    }
    Ok(())
}

/// Accepts TCP connections and serves each on its own thread with the same dispatcher.
pub fn serve_tcp(service: Arc<McpService>, addr: impl ToSocketAddrs) -> io::Result<()> {
    serve_listener(service, TcpListener::bind(addr)?)
}

/// [`serve_tcp`] on an already bound listener.
pub fn serve_listener(service: Arc<McpService>, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let service = Arc::clone(&service);
        std::thread::spawn(move || {
            let Ok(reader) = stream.try_clone() else { return };
            let _ = serve_stream(&service, reader, stream);
        });
    }
    Ok(())
}
