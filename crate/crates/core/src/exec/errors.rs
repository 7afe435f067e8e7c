use std::sync::OnceLock;

use regex::Regex;

use super::ExecutionResult;
use crate::case::{ErrorRecord, Severity};

/// Lines of log tail carried by a synthetic record for an unexplained nonzero exit.
pub const TAIL_LINES: usize = 50;

const FATAL_MARKERS: [&str; 2] = ["--> FOAM FATAL IO ERROR", "--> FOAM FATAL ERROR"];
const WARNING_MARKER: &str = "--> FOAM Warning";
const FATAL_END: &str = "FOAM exiting";

fn file_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bfile:\s*(\S+?)\.?(?:\s+(?:from|at)\s+line\s+(\d+))?\.?(?:\s|$)").unwrap())
}

fn marker_at(line: &str) -> Option<(Severity, &str)> {
    for m in FATAL_MARKERS {
        if let Some(pos) = line.find(m) {
            return Some((Severity::Fatal, &line[pos + m.len()..]));
        }
    }
    line.find(WARNING_MARKER).map(|pos| (Severity::Warning, &line[pos + WARNING_MARKER.len()..]))
}

fn record(log: &str, severity: Severity, lines: &[&str]) -> ErrorRecord {
    let message = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("\n");
    let location = lines
        .iter()
        .find_map(|l| file_line_re().captures(l))
        .map(|c| match c.get(2) {
            Some(line) => format!("{log}: {} line {}", &c[1], line.as_str()),
            None => format!("{log}: {}", &c[1]),
        })
        .unwrap_or_else(|| log.to_string());
    ErrorRecord { message, location, severity }
}

fn scan_log(log: &str, text: &str) -> Vec<ErrorRecord> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let Some((severity, rest)) = marker_at(lines[i]) else {
            i += 1;
            continue;
        };
        let mut body: Vec<&str> = Vec::new();
        let head = rest.trim_start_matches(|c: char| c == ':' || c.is_whitespace()).trim_end();
        if !head.is_empty() {
            body.push(head);
        }
        i += 1;
        while i < lines.len() {
            let line = lines[i];
            if marker_at(line).is_some() {
                break;
            }
            i += 1;
            match severity {
                Severity::Fatal if line.contains(FATAL_END) => break,
                // A warning block ends at the first blank line after its content.
                Severity::Warning if line.trim().is_empty() && !body.is_empty() => break,
                _ => body.push(line),
            }
        }
        out.push(record(log, severity, &body));
    }
    out
}

pub fn tail_lines(text: &str, n: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(n)..].join("\n")
}

/// Maps captured logs to error records.
///
/// Logs are scanned in name order. `--> FOAM FATAL [IO] ERROR` opens a fatal
/// block closed by the `FOAM exiting` line; `--> FOAM Warning` opens a
/// warning block closed by a blank line. A command with a nonzero exit code
/// whose own `log.<command>` holds no fatal block (or, when that log does not
/// exist, when no log holds one) adds a synthetic fatal record with the last
/// [`TAIL_LINES`] lines of its log, falling back to `stderr` then `stdout`.
pub fn extract_errors(result: &ExecutionResult) -> Vec<ErrorRecord> {
    let mut out = Vec::new();
    for (name, text) in &result.logs {
        out.extend(scan_log(name, text));
    }
    let any_fatal = out.iter().any(|r| r.severity == Severity::Fatal);
    let mut synthetic = Vec::new();
    for (cmd, &code) in &result.exit_codes {
        if code == 0 {
            continue;
        }
        let own = format!("log.{cmd}");
        let explained = if result.logs.contains_key(&own) {
            out.iter().any(|r| r.severity == Severity::Fatal && (r.location == own || r.location.starts_with(&format!("{own}:"))))
        } else {
            any_fatal
        };
        if explained {
            continue;
        }
        let source = [own.as_str(), "stderr", "stdout"].into_iter().find(|k| result.logs.contains_key(*k));
        let (location, tail) = match source {
            Some(k) => (k.to_string(), tail_lines(&result.logs[k], TAIL_LINES)),
            None => (cmd.clone(), String::new()),
        };
        let message = if tail.is_empty() {
            format!("{cmd} exited with code {code}")
        } else {
            format!("{cmd} exited with code {code}\n{tail}")
        };
        synthetic.push(ErrorRecord { message, location, severity: Severity::Fatal });
    }
    out.extend(synthetic);
    out
}

/// Text form of error records used as `error_logs` in reviewer prompts.
pub fn render_errors(records: &[ErrorRecord]) -> String {
    records
        .iter()
        .map(|r| {
            let sev = match r.severity {
                Severity::Fatal => "fatal",
                Severity::Warning => "warning",
            };
            format!("[{sev}] {}\n{}", r.location, r.message)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}
