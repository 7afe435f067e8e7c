//! `foamforge`: end-to-end runs, index building, the tool service and the
//! ablation bench.
//!
//! Exit codes: 0 on success, 1 when a simulation (or any other runtime step)
//! fails, 2 for configuration and usage errors.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use settings::{ConfigArgs, PathArgs};

/// Raised for bad flags, missing inputs and unusable settings; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "foamforge", version, about = "Automated OpenFOAM case setup, execution and repair")]
struct Cli {
    #[command(flatten)]
    paths: PathArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExecutorChoice {
    /// Run `Allrun` for real (requires FOAMFORGE_REAL_EXEC=1 and OpenFOAM).
    Local,
    /// Offline stand-in that checks the case files and fakes solver logs.
    Simulated,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate, run and repair one case from a natural-language requirement.
    Run(RunArgs),
    /// Build or inspect a retrieval index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Serve the tool interface over JSON-RPC (stdio unless --listen).
    Serve(ServeArgs),
    /// Run a scenario suite across a toggle matrix and print a CSV summary.
    Bench(BenchArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// File holding the requirement text.
    #[arg(value_name = "PROMPT_FILE", conflicts_with = "prompt")]
    pub prompt_file: Option<PathBuf>,
    /// Requirement text given inline.
    #[arg(short, long, value_name = "TEXT")]
    pub prompt: Option<String>,
    /// Case identifier; also the directory name under the work directory.
    #[arg(long, value_name = "ID")]
    pub case_id: Option<String>,
    /// User-supplied files such as external meshes. Repeatable.
    #[arg(long = "attach", value_name = "PATH")]
    pub attachments: Vec<PathBuf>,
    /// Offline mode: answer with a scripted scenario from the built-in suite
    /// (or from --suite) instead of calling a language model.
    #[arg(long, value_name = "NAME", conflicts_with_all = ["prompt", "prompt_file"])]
    pub scenario: Option<String>,
    /// Suite file that --scenario names are looked up in.
    #[arg(long, value_name = "FILE", requires = "scenario")]
    pub suite: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub executor: Option<ExecutorChoice>,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Ingest a tutorial tree and write the four retrieval indices.
    Build {
        /// Root of the tutorial tree; every directory with a `system/` child is a case.
        corpus_root: PathBuf,
        #[arg(short, long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = EmbedderChoice::Hash)]
        embedder: EmbedderChoice,
    },
    /// Print the entry counts of a saved index.
    Info { dir: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderChoice {
    /// Deterministic feature hashing; no network access.
    Hash,
    /// The embeddings endpoint from the [llm] settings.
    Http,
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    /// Listen on a TCP address instead of stdio, e.g. 127.0.0.1:7300.
    #[arg(long, value_name = "ADDR")]
    pub listen: Option<String>,
    /// Offline mode: every case is answered by this scripted scenario.
    #[arg(long, value_name = "NAME")]
    pub scenario: Option<String>,
    #[arg(long, value_name = "FILE", requires = "scenario")]
    pub suite: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub executor: Option<ExecutorChoice>,
    /// Background job workers. 0 runs jobs step by step as they are polled.
    #[arg(long, value_name = "N", default_value_t = 2)]
    pub job_workers: usize,
    /// Submit `hpc` runs with sbatch/squeue/sacct.
    #[arg(long)]
    pub slurm: bool,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    /// Suite file (JSON or TOML). Defaults to the built-in repair suite.
    pub suite_file: Option<PathBuf>,
    /// Comma-separated settings to toggle: reviewer, file_dependency, retrieval_mode.
    #[arg(long, value_delimiter = ',', default_value = "reviewer,file_dependency")]
    pub toggles: Vec<String>,
    /// Workflows run at the same time.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|e| {
        e.is::<UsageError>()
            || e.is::<foamforge_core::ConfigError>()
            || e.is::<foamforge_core::prompts::PromptError>()
            || matches!(e.downcast_ref::<foamforge_core::ablation::BenchError>(),
                Some(foamforge_core::ablation::BenchError::UnknownToggle(_) | foamforge_core::ablation::BenchError::Suite(_)))
    });
    if usage {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => commands::run(&cli.paths, &cli.config, args),
        Command::Index(cmd) => commands::index(&cli.paths, &cli.config, cmd),
        Command::Serve(args) => commands::serve(&cli.paths, &cli.config, args),
        Command::Bench(args) => commands::bench(&cli.paths, &cli.config, args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
