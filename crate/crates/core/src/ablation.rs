//! Runs a scenario suite across a matrix of workflow toggles and reports
//! success rate, token usage and reviewer loops per configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::RunStatus;
use crate::config::{Config, RetrievalMode};
use crate::scenario::{ScenarioKit, Suite};
use crate::workflow::WorkflowError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown toggle '{0}' (expected reviewer, file_dependency or retrieval_mode)")]
    UnknownToggle(String),
    #[error("invalid suite: {0}")]
    Suite(String),
    #[error("case {case}: {source}")]
    Case {
        case: String,
        #[source]
        source: WorkflowError,
    },
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Toggle {
    Reviewer,
    FileDependency,
    RetrievalMode,
}

impl FromStr for Toggle {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "reviewer" => Ok(Toggle::Reviewer),
            "file_dependency" | "file-dependency" => Ok(Toggle::FileDependency),
            "retrieval_mode" | "retrieval-mode" | "retrieval" => Ok(Toggle::RetrievalMode),
            other => Err(BenchError::UnknownToggle(other.to_string())),
        }
    }
}

/// The default matrix: reviewer × file dependency.
pub const DEFAULT_TOGGLES: [Toggle; 2] = [Toggle::Reviewer, Toggle::FileDependency];

/// Every combination of the toggled settings, enabled settings first.
/// Settings that are not toggled keep their `base` value.
pub fn config_matrix(base: &Config, toggles: &[Toggle]) -> Vec<Config> {
    let mut out = vec![base.clone()];
    for t in [Toggle::Reviewer, Toggle::FileDependency, Toggle::RetrievalMode] {
        if !toggles.contains(&t) {
            continue;
        }
        out = out
            .into_iter()
            .flat_map(|c| {
                let mut on = c.clone();
                let mut off = c;
                match t {
                    Toggle::Reviewer => (on.reviewer_enabled, off.reviewer_enabled) = (true, false),
                    Toggle::FileDependency => (on.file_dependency_enabled, off.file_dependency_enabled) = (true, false),
                    Toggle::RetrievalMode => {
                        (on.retrieval_mode, off.retrieval_mode) = (RetrievalMode::Hierarchy, RetrievalMode::SingleIndex)
                    }
                }
                [on, off]
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub success: bool,
    pub token_usage: u64,
    pub loop_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub reviewer: bool,
    pub file_dependency: bool,
    pub retrieval_mode: RetrievalMode,
    pub cases: Vec<CaseOutcome>,
}

impl BenchRow {
    pub fn success_rate(&self) -> f64 {
        100.0 * self.cases.iter().filter(|c| c.success).count() as f64 / self.cases.len().max(1) as f64
    }

    pub fn mean_tokens(&self) -> f64 {
        self.cases.iter().map(|c| c.token_usage as f64).sum::<f64>() / self.cases.len().max(1) as f64
    }

    /// Σ loop_count / number of cases.
    pub fn avg_reviewer_loops(&self) -> f64 {
        self.cases.iter().map(|c| c.loop_count as f64).sum::<f64>() / self.cases.len().max(1) as f64
    }

    fn label(&self) -> String {
        format!(
            "reviewer-{}_dependency-{}_{}",
            if self.reviewer { "on" } else { "off" },
            if self.file_dependency { "on" } else { "off" },
            self.retrieval_mode
        )
    }
}

/// Runs every suite case under every configuration with up to `jobs`
/// workflows at a time. Results keep matrix order, then suite order, no
/// matter which worker finished first.
pub fn run_bench(
    kit: &ScenarioKit,
    suite: &Suite,
    configs: &[Config],
    jobs: usize,
    workdir: &Path,
) -> Result<Vec<BenchRow>, BenchError> {
    suite.validate().map_err(BenchError::Suite)?;
    let mut rows: Vec<BenchRow> = configs
        .iter()
        .map(|c| BenchRow {
            reviewer: c.reviewer_enabled,
            file_dependency: c.file_dependency_enabled,
            retrieval_mode: c.retrieval_mode,
            cases: Vec::new(),
        })
        .collect();
    let tasks: Vec<(usize, usize, PathBuf)> = (0..configs.len())
        .flat_map(|r| (0..suite.cases.len()).map(move |c| (r, c)))
        .map(|(r, c)| (r, c, workdir.join(rows[r].label())))
        .collect();
    let results: Mutex<Vec<Option<Result<CaseOutcome, BenchError>>>> =
        Mutex::new(std::iter::repeat_with(|| None).take(tasks.len()).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, tasks.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((r, c, dir)) = tasks.get(i) else { break };
                let spec = &suite.cases[*c];
                let outcome = kit
                    .run(spec, &configs[*r], dir)
                    .map(|o| CaseOutcome {
                        name: spec.name.clone(),
                        success: o.state.run_status == RunStatus::Success,
                        token_usage: o.state.token_usage,
                        loop_count: o.state.loop_count,
                    })
                    .map_err(|source| BenchError::Case { case: spec.name.clone(), source });
                results.lock().expect("results")[i] = Some(outcome);
            });
        }
    });
    for ((r, _, _), outcome) in tasks.iter().zip(results.into_inner().expect("results")) {
        rows[*r].cases.push(outcome.expect("every task ran")?);
    }
    Ok(rows)
}

pub const CSV_HEADER: [&str; 7] =
    ["reviewer", "file_dependency", "retrieval_mode", "cases", "success_rate", "token_usage", "avg_reviewer_loops"];

/// One line per configuration: success rate in percent, mean tokens per
/// case and average reviewer loops.
pub fn to_csv(rows: &[BenchRow]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| BenchError::Csv(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.reviewer.to_string(),
            r.file_dependency.to_string(),
            r.retrieval_mode.to_string(),
            r.cases.len().to_string(),
            format!("{:.1}", r.success_rate()),
            format!("{:.1}", r.mean_tokens()),
            format!("{:.2}", r.avg_reviewer_loops()),
        ])
        .map_err(|e| BenchError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
