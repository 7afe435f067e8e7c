//! Agent behaviors over a [`CaseState`]. Each agent renders registered
//! templates, calls the provider, and records token usage on the state.

mod architect;
mod hpc;
mod mesh;
pub mod requirement;
mod reviewer;
mod runner;
mod visualize;
mod writer;

pub use architect::architect_plan;
pub use hpc::{generate_hpc_script, render_slurm_script};
pub use mesh::{ensure_mesh_commands, prepare_mesh, select_mesh_mode, MeshMode, MeshPlan, MeshSpec};
pub use requirement::{HpcConfig, TimeSelection, VisualizationRequest};
pub use reviewer::{apply_modifications, guard_pinned_values, render_history, review, ReviewAnalysis};
pub use runner::run_simulation;
pub(crate) use runner::attach_logs;
pub use visualize::{visualize, VISUALIZATION_SCRIPT};
pub use writer::{generate_allrun, generate_file, relint, write_inputs};

use std::collections::BTreeMap;
use std::sync::Mutex;

use thiserror::Error;

use crate::case::{CaseError, CaseState, VocabularySets};
use crate::config::{Config, RetrievalMode};
use crate::exec::ExecError;
use crate::index::{bundled_command_docs, CommandDoc, IndexError, IndexSet, RetrievalParams, RetrievalResult, Stage};
use crate::llm::{complete_structured, complete_text, CompletionRequest, LlmError, Provider, StructuredOutput, TokenLedger};
use crate::prompts::{PromptError, PromptLibrary};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("executor failure: {error}")]
    Executor { error: ExecError, logs: String },
    #[error("the planner returned no files")]
    EmptyPlan,
    #[error("the model returned no corrected files")]
    EmptyCorrection,
    #[error("the model returned empty content for {0}")]
    EmptyContent(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("hpc configuration has no account")]
    MissingAccount,
    #[error("visualization failed after {attempts} attempts")]
    VisualizationExhausted { attempts: u32 },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl From<ExecError> for AgentError {
    fn from(error: ExecError) -> Self {
        AgentError::Executor { error, logs: String::new() }
    }
}

impl AgentError {
    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        AgentError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

/// One retrieval an agent performed, kept for inspection and tracing.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RetrievalCall {
    /// `None` for single-index retrieval.
    pub stage: Option<Stage>,
    pub query: String,
    /// Restricted to a subset of cases (cascade refinement).
    pub restricted: bool,
    pub matched_cases: Vec<String>,
}

/// Everything an agent needs besides the state it works on.
pub struct AgentContext<'a> {
    pub provider: &'a dyn Provider,
    pub indices: &'a IndexSet,
    pub prompts: &'a PromptLibrary,
    pub vocab: &'a VocabularySets,
    pub config: &'a Config,
    pub commands: Vec<CommandDoc>,
    retrievals: Mutex<Vec<RetrievalCall>>,
}

impl<'a> AgentContext<'a> {
    pub fn new(
        provider: &'a dyn Provider,
        indices: &'a IndexSet,
        prompts: &'a PromptLibrary,
        vocab: &'a VocabularySets,
        config: &'a Config,
    ) -> Self {
        AgentContext {
            provider,
            indices,
            prompts,
            vocab,
            config,
            commands: bundled_command_docs(),
            retrievals: Mutex::new(Vec::new()),
        }
    }

    pub fn with_commands(mut self, commands: Vec<CommandDoc>) -> Self {
        self.commands = commands;
        self
    }

    pub fn retrievals(&self) -> Vec<RetrievalCall> {
        self.retrievals.lock().unwrap().clone()
    }

    /// Drains the retrieval log.
    pub fn take_retrievals(&self) -> Vec<RetrievalCall> {
        std::mem::take(&mut *self.retrievals.lock().unwrap())
    }

    fn request(&self, template: &str, slots: &BTreeMap<String, String>) -> Result<CompletionRequest, AgentError> {
        let (system, user) = self.prompts.render(template, slots)?;
        Ok(CompletionRequest::new(template, system, user, self.config.temperature))
    }

    pub(crate) fn text(
        &self,
        state: &mut CaseState,
        template: &str,
        slots: BTreeMap<String, String>,
    ) -> Result<String, AgentError> {
        let req = self.request(template, &slots)?;
        let mut ledger = TokenLedger::default();
        let out = complete_text(self.provider, &req, &mut ledger);
        state.add_tokens(ledger.prompt_tokens, ledger.completion_tokens);
        Ok(out?)
    }

    pub(crate) fn structured<T: StructuredOutput>(
        &self,
        state: &mut CaseState,
        template: &str,
        slots: BTreeMap<String, String>,
    ) -> Result<T, AgentError> {
        let req = self.request(template, &slots)?;
        let mut ledger = TokenLedger::default();
        let out = complete_structured::<T>(self.provider, &req, &mut ledger);
        state.add_tokens(ledger.prompt_tokens, ledger.completion_tokens);
        Ok(out?)
    }

    fn log(&self, stage: Option<Stage>, query: &str, restricted: bool, r: &RetrievalResult) {
        let matched_cases = r.matches.iter().filter_map(|m| m.payload.case_id.clone()).collect();
        self.retrievals.lock().unwrap().push(RetrievalCall { stage, query: query.to_string(), restricted, matched_cases });
    }

    /// Stage retrieval in hierarchy mode, merged-index retrieval otherwise.
    pub(crate) fn retrieve(&self, stage: Stage, query: &str, context: &str) -> Result<RetrievalResult, AgentError> {
        let params = RetrievalParams::from(self.config);
        let r = match self.config.retrieval_mode {
            RetrievalMode::Hierarchy => {
                let r = self.indices.retrieve(self.provider, query, stage, context, params)?;
                self.log(Some(stage), query, false, &r);
                r
            }
            RetrievalMode::SingleIndex => {
                let r = self.indices.retrieve_single_index(self.provider, query, context, params)?;
                self.log(None, query, false, &r);
                r
            }
        };
        Ok(r)
    }

    pub(crate) fn retrieve_within(
        &self,
        stage: Stage,
        query: &str,
        context: &str,
        cases: &std::collections::BTreeSet<String>,
    ) -> Result<RetrievalResult, AgentError> {
        let params = RetrievalParams::from(self.config);
        let r = self.indices.retrieve_within(self.provider, query, stage, context, params, cases)?;
        self.log(Some(stage), query, true, &r);
        Ok(r)
    }
}

/// Slot map from `(name, value)` pairs.
pub(crate) fn slots<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
