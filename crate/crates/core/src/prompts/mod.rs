//! Prompt templates with `{slot}` placeholders (`{{` and `}}` are literal
//! braces). The bundled texts live in `templates/` as
//! `<id>.system.txt` / `<id>.user.txt`; a template without a system file
//! is a fragment that renders an empty system prompt.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("template '{template}' needs slot '{slot}'")]
    MissingSlot { template: String, slot: String },
    #[error("template '{template}' is malformed: {message}")]
    Malformed { template: String, message: String },
    #[error("cannot read template file {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Text(String),
    Slot(String),
}

fn compile(template: &str, text: &str) -> Result<Vec<Piece>, PromptError> {
    let malformed = |message: String| PromptError::Malformed { template: template.to_string(), message };
    let mut pieces = Vec::new();
    let mut lit = String::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '{' if chars.peek().map(|p| p.1) == Some('{') => {
                chars.next();
                lit.push('{');
            }
            '}' if chars.peek().map(|p| p.1) == Some('}') => {
                chars.next();
                lit.push('}');
            }
            '{' => {
                let rest = &text[i + 1..];
                let end = rest.find('}').ok_or_else(|| malformed(format!("unclosed '{{' at byte {i}")))?;
                let name = &rest[..end];
                let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !valid {
                    return Err(malformed(format!("invalid slot name '{name}' at byte {i}")));
                }
                if !lit.is_empty() {
                    pieces.push(Piece::Text(std::mem::take(&mut lit)));
                }
                pieces.push(Piece::Slot(name.to_string()));
                for _ in 0..=end {
                    chars.next();
                }
            }
            '}' => return Err(malformed(format!("stray '}}' at byte {i}"))),
            _ => lit.push(c),
        }
    }
    if !lit.is_empty() {
        pieces.push(Piece::Text(lit));
    }
    Ok(pieces)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub system_text: String,
    pub user_text: String,
    pub required_slots: BTreeSet<String>,
    /// Authored for this project rather than transcribed from a published prompt.
    pub reconstructed: bool,
    system: Vec<Piece>,
    user: Vec<Piece>,
}

impl PromptTemplate {
    pub fn new(id: &str, system_text: &str, user_text: &str, reconstructed: bool) -> Result<Self, PromptError> {
        let system = compile(id, system_text)?;
        let user = compile(id, user_text)?;
        let required_slots = system
            .iter()
            .chain(&user)
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s.clone()),
                Piece::Text(_) => None,
            })
            .collect();
        Ok(PromptTemplate {
            template_id: id.to_string(),
            system_text: system_text.to_string(),
            user_text: user_text.to_string(),
            required_slots,
            reconstructed,
            system,
            user,
        })
    }

    fn fill(&self, pieces: &[Piece], slots: &BTreeMap<String, String>) -> Result<String, PromptError> {
        let mut out = String::new();
        for p in pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => out.push_str(slots.get(s).ok_or_else(|| PromptError::MissingSlot {
                    template: self.template_id.clone(),
                    slot: s.clone(),
                })?),
            }
        }
        Ok(out)
    }

    /// Substitutes every slot. Extra entries in `slots` are ignored.
    pub fn render(&self, slots: &BTreeMap<String, String>) -> Result<(String, String), PromptError> {
        Ok((self.fill(&self.system, slots)?, self.fill(&self.user, slots)?))
    }
}

/// Builds a slot map from pairs.
pub fn slots<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

struct Bundled {
    id: &'static str,
    system: Option<&'static str>,
    user: &'static str,
    reconstructed: bool,
}

macro_rules! bundled {
    ($id:literal, system, $rec:literal) => {
        Bundled {
            id: $id,
            system: Some(include_str!(concat!("../../templates/", $id, ".system.txt"))),
            user: include_str!(concat!("../../templates/", $id, ".user.txt")),
            reconstructed: $rec,
        }
    };
    ($id:literal, fragment, $rec:literal) => {
        Bundled { id: $id, system: None, user: include_str!(concat!("../../templates/", $id, ".user.txt")), reconstructed: $rec }
    };
}

const BUNDLED: &[Bundled] = &[
    bundled!("case_description", system, false),
    bundled!("task_decomposition", system, false),
    bundled!("file_generation", system, false),
    bundled!("file_generation_context", fragment, false),
    bundled!("command_generation", system, false),
    bundled!("allrun_generation", system, false),
    bundled!("error_analysis_initial", system, false),
    bundled!("error_analysis_subsequent", system, false),
    bundled!("file_correction", system, false),
    bundled!("history_entry", fragment, false),
    bundled!("gmsh_script", system, true),
    bundled!("visualization", system, true),
    bundled!("visualization_retry", fragment, true),
];

/// Strips the single trailing newline a text file conventionally ends with.
fn body(text: &str) -> &str {
    text.strip_suffix('\n').unwrap_or(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptLibrary {
    templates: BTreeMap<String, PromptTemplate>,
}

impl PromptLibrary {
    pub fn bundled() -> Self {
        let templates = BUNDLED
            .iter()
            .map(|b| {
                let t = PromptTemplate::new(b.id, body(b.system.unwrap_or("")), body(b.user), b.reconstructed)
                    .unwrap_or_else(|e| panic!("bundled template is malformed: {e}"));
                (b.id.to_string(), t)
            })
            .collect();
        PromptLibrary { templates }
    }

    /// Bundled templates with any `<dir>/<id>.system.txt` / `<id>.user.txt`
    /// files replacing the matching half. Unknown ids in `dir` are added.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut lib = Self::bundled();
        let entries = std::fs::read_dir(dir).map_err(|e| PromptError::Io { path: dir.display().to_string(), message: e.to_string() })?;
        let mut ids = BTreeSet::new();
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".system.txt").or_else(|| name.strip_suffix(".user.txt")) {
                ids.insert(id.to_string());
            }
        }
        for id in ids {
            let read = |suffix: &str| -> Result<Option<String>, PromptError> {
                let p = dir.join(format!("{id}.{suffix}.txt"));
                if !p.exists() {
                    return Ok(None);
                }
                std::fs::read_to_string(&p)
                    .map(|t| Some(body(&t).to_string()))
                    .map_err(|e| PromptError::Io { path: p.display().to_string(), message: e.to_string() })
            };
            let base = lib.templates.get(&id);
            let system = match read("system")? {
                Some(s) => s,
                None => base.map(|b| b.system_text.clone()).unwrap_or_default(),
            };
            let user = match read("user")? {
                Some(u) => u,
                None => base.map(|b| b.user_text.clone()).unwrap_or_default(),
            };
            let t = PromptTemplate::new(&id, &system, &user, true)?;
            lib.templates.insert(id, t);
        }
        Ok(lib)
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates.get(id).ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(&self, id: &str, slots: &BTreeMap<String, String>) -> Result<(String, String), PromptError> {
        self.get(id)?.render(slots)
    }
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::bundled()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_and_slots() {
        let t = PromptTemplate::new("t", "", "a {{x}} {y}}}", false).unwrap();
        assert_eq!(t.required_slots, BTreeSet::from(["y".to_string()]));
        assert_eq!(t.render(&slots([("y", "{v}")])).unwrap().1, "a {x} {v}}");
    }

    #[test]
    fn malformed_braces_rejected() {
        assert!(PromptTemplate::new("t", "", "a { b", false).is_err());
        assert!(PromptTemplate::new("t", "", "a } b", false).is_err());
        assert!(PromptTemplate::new("t", "", "{not a slot}", false).is_err());
    }

    #[test]
    fn bundled_inventory() {
        let lib = PromptLibrary::bundled();
        let ids: Vec<&str> = lib.ids().collect();
        for id in [
            "case_description",
            "task_decomposition",
            "file_generation",
            "command_generation",
            "allrun_generation",
            "error_analysis_initial",
            "error_analysis_subsequent",
            "file_correction",
            "history_entry",
        ] {
            assert!(ids.contains(&id), "{id}");
            assert!(!lib.get(id).unwrap().reconstructed);
        }
        assert!(lib.get("gmsh_script").unwrap().reconstructed);
        assert_eq!(lib.get("nope").unwrap_err(), PromptError::UnknownTemplate("nope".into()));
    }

    #[test]
    fn task_decomposition_renders_requirement() {
        let lib = PromptLibrary::bundled();
        let (sys, user) = lib
            .render("task_decomposition", &slots([("user_requirement", "X"), ("dir_structure", "Y"), ("dir_counts_str", "Z")]))
            .unwrap();
        assert!(sys.starts_with("You are an experienced Planner specializing in OpenFOAM projects."));
        assert!(sys.contains("\"subtasks\": ["));
        assert!(user.contains("User Requirement: X"));
        let err = lib.render("task_decomposition", &slots([("user_requirement", "X"), ("dir_counts_str", "Z")])).unwrap_err();
        assert_eq!(err, PromptError::MissingSlot { template: "task_decomposition".into(), slot: "dir_structure".into() });
    }

    #[test]
    fn history_entry_starts_with_attempt_tag() {
        let lib = PromptLibrary::bundled();
        let (sys, user) =
            lib.render("history_entry", &slots([("attempt_number", "1"), ("error_logs", "e"), ("review_content", "r")])).unwrap();
        assert_eq!(sys, "");
        assert!(user.starts_with("<Attempt 1>"));
    }

    #[test]
    fn overrides_replace_one_half() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("case_description.user.txt"), "Req={user_requirement}\n").unwrap();
        let lib = PromptLibrary::with_overrides(dir.path()).unwrap();
        let t = lib.get("case_description").unwrap();
        assert_eq!(t.user_text, "Req={user_requirement}");
        assert_eq!(t.system_text, PromptLibrary::bundled().get("case_description").unwrap().system_text);
        assert!(t.reconstructed);
    }
}
