use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CompletionRequest, LlmError, Provider, TokenLedger};
use crate::case::{CaseDescriptor, FoamFile, PlannedFile};

/// A JSON shape a completion must conform to.
pub trait StructuredOutput: DeserializeOwned {
    const SCHEMA_ID: &'static str;

    /// Semantic checks beyond what deserialization enforces.
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDescription {
    pub case_name: String,
    pub case_domain: String,
    pub case_category: String,
    pub case_solver: String,
}

impl CaseDescription {
    pub fn into_descriptor(self) -> CaseDescriptor {
        CaseDescriptor {
            case_name: self.case_name,
            case_domain: self.case_domain,
            case_category: self.case_category,
            case_solver: self.case_solver,
        }
    }
}

impl StructuredOutput for CaseDescription {
    const SCHEMA_ID: &'static str = "case_description";
    fn validate(&self) -> Result<(), String> {
        for (k, v) in [
            ("case_name", &self.case_name),
            ("case_domain", &self.case_domain),
            ("case_category", &self.case_category),
            ("case_solver", &self.case_solver),
        ] {
            if v.trim().is_empty() {
                return Err(format!("{k} is empty"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subtask {
    pub file_name: String,
    pub folder_name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependencies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
}

impl Subtask {
    pub fn to_planned(&self) -> PlannedFile {
        PlannedFile {
            file_name: self.file_name.clone(),
            folder_name: self.folder_name.clone(),
            dependencies: self.dependencies.clone(),
            priority: self.priority.unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subtasks {
    pub subtasks: Vec<Subtask>,
}

impl StructuredOutput for Subtasks {
    const SCHEMA_ID: &'static str = "subtasks";
    fn validate(&self) -> Result<(), String> {
        for (i, s) in self.subtasks.iter().enumerate() {
            if s.file_name.trim().is_empty() {
                return Err(format!("subtasks[{i}].file_name is empty"));
            }
            if s.file_name.contains('/') {
                return Err(format!("subtasks[{i}].file_name '{}' contains a path separator", s.file_name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoamFileItem {
    pub file_name: String,
    pub folder_name: String,
    pub content: String,
}

/// Output of the correction prompt: a top-level JSON array of files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FoamFileList(pub Vec<FoamFileItem>);

impl FoamFileList {
    pub fn into_files(self) -> Vec<FoamFile> {
        self.0.into_iter().map(|f| FoamFile::new(&f.folder_name, &f.file_name, f.content)).collect()
    }
}

impl StructuredOutput for FoamFileList {
    const SCHEMA_ID: &'static str = "foamfile_list";
    fn validate(&self) -> Result<(), String> {
        for (i, f) in self.0.iter().enumerate() {
            if f.file_name.trim().is_empty() {
                return Err(format!("[{i}].file_name is empty"));
            }
            if f.content.trim().is_empty() {
                return Err(format!("[{i}].content is empty"));
            }
        }
        Ok(())
    }
}

/// Output of the command-selection prompt: a nonempty JSON array of command names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommandList(pub Vec<String>);

impl StructuredOutput for CommandList {
    const SCHEMA_ID: &'static str = "command_list";
    fn validate(&self) -> Result<(), String> {
        if self.0.is_empty() {
            return Err("command list is empty".into());
        }
        if self.0.iter().any(|c| c.trim().is_empty()) {
            return Err("command list contains an empty entry".into());
        }
        Ok(())
    }
}

/// Returns the body of the first fenced code block, or the trimmed text when
/// there is none. An unterminated fence runs to the end of the text.
pub fn strip_code_fences(text: &str) -> String {
    let Some(start) = text.find("```") else {
        return text.trim().to_string();
    };
    let after = &text[start + 3..];
    // Skip an info string such as `json` or `bash` on the fence line.
    let body = match after.find('\n') {
        Some(nl) if !after[..nl].trim().contains(' ') => &after[nl + 1..],
        _ => after,
    };
    let end = body.find("```").unwrap_or(body.len());
    body[..end].trim().to_string()
}

fn parse_checked<T: StructuredOutput>(text: &str) -> Result<T, String> {
    let body = strip_code_fences(text);
    let value: T = serde_json::from_str(&body).map_err(|e| e.to_string())?;
    value.validate()?;
    Ok(value)
}

/// Plain completion; the result text is returned unmodified.
pub fn complete_text(provider: &dyn Provider, req: &CompletionRequest, ledger: &mut TokenLedger) -> Result<String, LlmError> {
    let r = provider.complete(req)?;
    ledger.record(&r);
    Ok(r.text)
}

/// Completion that must parse as `T`. A response that fails to parse or
/// validate earns exactly one re-prompt carrying the error; a second failure
/// is a [`LlmError::SchemaViolation`].
pub fn complete_structured<T: StructuredOutput>(
    provider: &dyn Provider,
    req: &CompletionRequest,
    ledger: &mut TokenLedger,
) -> Result<T, LlmError> {
    let mut req = req.clone();
    req.schema_id = Some(T::SCHEMA_ID.to_string());
    let first = complete_text(provider, &req, ledger)?;
    let err = match parse_checked::<T>(&first) {
        Ok(v) => return Ok(v),
        Err(e) => e,
    };
    let mut retry = req.clone();
    retry.user_prompt = format!(
        "{}\n\nYour previous response could not be accepted: {err}\nRespond again with output that strictly follows the required JSON schema and nothing else.",
        req.user_prompt
    );
    let second = complete_text(provider, &retry, ledger)?;
    parse_checked::<T>(&second).map_err(|message| LlmError::SchemaViolation { schema: T::SCHEMA_ID.to_string(), message })
}
