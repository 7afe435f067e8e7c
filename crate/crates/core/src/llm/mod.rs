//! Completion and embedding backends behind one contract, plus
//! structured-output enforcement and token accounting.

mod hash;
#[cfg(feature = "http")]
mod http;
mod scripted;
mod settings;
mod structured;

pub use hash::HashEmbedder;
#[cfg(feature = "http")]
pub use http::HttpProvider;
pub use scripted::ScriptedProvider;
pub use settings::HttpSettings;
pub use structured::{
    complete_structured, complete_text, strip_code_fences, CaseDescription, CommandList, FoamFileList, StructuredOutput,
    Subtask, Subtasks,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("scripted provider exhausted after {calls} calls")]
    ScriptExhausted { calls: usize },
    #[error("response violates schema {schema}: {message}")]
    SchemaViolation { schema: String, message: String },
    #[error("provider failure: {0}")]
    ProviderFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    /// Registered template the prompts were rendered from.
    pub template_id: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub schema_id: Option<String>,
}

impl CompletionRequest {
    pub fn new(template_id: &str, system_prompt: String, user_prompt: String, temperature: f64) -> Self {
        CompletionRequest { template_id: template_id.to_string(), system_prompt, user_prompt, temperature, schema_id: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f32>, LlmError>;
}

pub trait Provider: Embedder {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, LlmError>;
}

/// Running totals over every completion made on behalf of one case.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenLedger {
    pub fn record(&mut self, r: &CompletionResult) {
        self.calls += 1;
        self.prompt_tokens += r.prompt_tokens;
        self.completion_tokens += r.completion_tokens;
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// Whitespace word count, the token measure used by the offline providers.
pub fn count_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
