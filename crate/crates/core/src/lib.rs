//! Multi-agent automation of OpenFOAM case setup, execution and repair.
//!
//! The most commonly used types are re-exported at the crate root; the
//! modules hold the rest.

pub mod ablation;
pub mod agents;
pub mod case;
pub mod config;
pub mod exec;
pub mod foam;
pub mod index;
pub mod llm;
pub mod mcp;
pub mod prompts;
pub mod scenario;
pub mod workflow;

pub use case::{CaseDescriptor, CaseState, FoamFile, RunStatus, VocabularySets};
pub use config::{Config, ConfigError, RetrievalMode, VisualizationBackend};
pub use exec::{ExecError, ExecutionResult, Executor};
pub use foam::{parse, serialize, DictionaryTree, ParseError};
pub use index::{IndexError, IndexSet};
pub use llm::{Embedder, LlmError, Provider};
pub use mcp::{JobMode, McpService, ServiceDeps};
pub use prompts::PromptLibrary;
pub use workflow::{run_workflow, WorkflowDeps, WorkflowError, WorkflowOutcome};
