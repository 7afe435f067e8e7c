//! Domain types shared by every agent: descriptors, plans, generated files,
//! error and attempt records, and the per-case state record.

mod order;
mod store;

pub use order::{folder_rank, generation_order};
pub use store::{case_dir, load_state, materialize, save_state, state_path};

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::MeshPlan;
use crate::foam::LintReport;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("unknown {field} '{value}': not in the configured vocabulary")]
    UnknownVocabularyTerm { field: &'static str, value: String },
    #[error("invalid case name '{0}': must be nonempty and contain no path separators")]
    InvalidCaseName(String),
    #[error("vocabulary set for {0} is empty")]
    EmptyVocabulary(&'static str),
    #[error("cyclic file dependency: {}", .0.join(" -> "))]
    CyclicDependency(Vec<String>),
    #[error("file '{file}' depends on '{dependency}', which is not in the plan")]
    UnknownDependency { file: String, dependency: String },
    #[error("file '{0}' appears more than once in the plan")]
    DuplicateFile(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl CaseError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CaseError::Io { path: path.display().to_string(), source }
    }
}

/// Closed vocabularies the case classifier must choose from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularySets {
    #[serde(rename = "case_domain")]
    pub domains: BTreeSet<String>,
    #[serde(rename = "case_category")]
    pub categories: BTreeSet<String>,
    #[serde(rename = "case_solver")]
    pub solvers: BTreeSet<String>,
}

const BUNDLED_VOCAB: &str = include_str!("../../data/vocab.json");

impl VocabularySets {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_VOCAB).expect("bundled vocabulary is valid json")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CaseError> {
        let text = std::fs::read_to_string(path).map_err(|e| CaseError::io(path, e))?;
        Self::from_json(&text).map_err(|source| CaseError::Json { path: path.display().to_string(), source })
    }

    pub fn check_nonempty(&self) -> Result<(), CaseError> {
        if self.domains.is_empty() {
            return Err(CaseError::EmptyVocabulary("case_domain"));
        }
        if self.categories.is_empty() {
            return Err(CaseError::EmptyVocabulary("case_category"));
        }
        if self.solvers.is_empty() {
            return Err(CaseError::EmptyVocabulary("case_solver"));
        }
        Ok(())
    }

    /// Python-style rendering used inside prompts: `'a', 'b'`.
    pub fn render_list(set: &BTreeSet<String>) -> String {
        set.iter().map(|s| format!("'{s}'")).collect::<Vec<_>>().join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDescriptor {
    pub case_name: String,
    pub case_domain: String,
    pub case_category: String,
    pub case_solver: String,
}

impl CaseDescriptor {
    /// Multi-line summary fed to the command and Allrun prompts.
    pub fn case_info(&self) -> String {
        format!(
            "case name: {}\ncase domain: {}\ncase category: {}\ncase solver: {}",
            self.case_name, self.case_domain, self.case_category, self.case_solver
        )
    }
}

pub fn is_filesystem_safe(name: &str) -> bool {
    !name.trim().is_empty()
        && !name.contains(['/', '\\', '\0'])
        && name != "."
        && name != ".."
}

pub fn validate_descriptor(raw: CaseDescriptor, vocab: &VocabularySets) -> Result<CaseDescriptor, CaseError> {
    vocab.check_nonempty()?;
    if !is_filesystem_safe(&raw.case_name) {
        return Err(CaseError::InvalidCaseName(raw.case_name));
    }
    let checks: [(&'static str, &String, &BTreeSet<String>); 3] = [
        ("case_domain", &raw.case_domain, &vocab.domains),
        ("case_category", &raw.case_category, &vocab.categories),
        ("case_solver", &raw.case_solver, &vocab.solvers),
    ];
    for (field, value, set) in checks {
        if !set.contains(value.as_str()) {
            return Err(CaseError::UnknownVocabularyTerm { field, value: value.clone() });
        }
    }
    Ok(raw)
}

/// Identifier of a file within a case: `folder/file`, or just `file` at the case root.
pub fn file_id(folder: &str, file: &str) -> String {
    if folder.is_empty() || folder == "." {
        file.to_string()
    } else {
        format!("{folder}/{file}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedFile {
    pub file_name: String,
    pub folder_name: String,
    /// Ids (`folder/file`) of files in the same plan this one depends on.
    #[serde(default)]
    pub dependencies: Vec<String>,
    /// Advisory only; ordering is decided by folder rank and dependencies.
    #[serde(default)]
    pub priority: u32,
}

impl PlannedFile {
    pub fn new(folder: &str, file: &str) -> Self {
        PlannedFile {
            file_name: file.to_string(),
            folder_name: folder.to_string(),
            dependencies: Vec::new(),
            priority: 0,
        }
    }

    pub fn with_deps(mut self, deps: &[&str]) -> Self {
        self.dependencies = deps.iter().map(|d| d.to_string()).collect();
        self
    }

    pub fn id(&self) -> String {
        file_id(&self.folder_name, &self.file_name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub files: Vec<PlannedFile>,
    pub source_reference: String,
}

impl SimulationPlan {
    /// Checks id uniqueness and that dependencies stay inside the plan.
    pub fn validate(&self) -> Result<(), CaseError> {
        let mut seen = HashSet::new();
        for f in &self.files {
            if !seen.insert(f.id()) {
                return Err(CaseError::DuplicateFile(f.id()));
            }
        }
        for f in &self.files {
            for d in &f.dependencies {
                if !seen.contains(d) {
                    return Err(CaseError::UnknownDependency { file: f.id(), dependency: d.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, folder: &str, file: &str) -> bool {
        let id = file_id(folder, file);
        self.files.iter().any(|f| f.id() == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoamFile {
    pub file_name: String,
    pub folder_name: String,
    pub content: String,
}

impl FoamFile {
    pub fn new(folder: &str, file: &str, content: impl Into<String>) -> Self {
        FoamFile { file_name: file.to_string(), folder_name: folder.to_string(), content: content.into() }
    }

    pub fn id(&self) -> String {
        file_id(&self.folder_name, &self.file_name)
    }

    pub fn is_executable_script(&self) -> bool {
        self.file_name.starts_with("Allrun") || self.file_name.starts_with("Allclean") || self.file_name.ends_with(".sh")
    }
}

/// Replaces the file with the same id or appends it. Returns true when it replaced one.
pub fn upsert_file(files: &mut Vec<FoamFile>, file: FoamFile) -> bool {
    let id = file.id();
    match files.iter_mut().find(|f| f.id() == id) {
        Some(existing) => {
            *existing = file;
            true
        }
        None => {
            files.push(file);
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Fatal,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub message: String,
    pub location: String,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt_number: u32,
    pub file_snapshot: Vec<FoamFile>,
    pub error_logs: String,
    pub review_analysis: String,
    #[serde(default)]
    pub errors: Vec<ErrorRecord>,
}

impl AttemptRecord {
    pub fn fatal_count(&self) -> usize {
        self.errors.iter().filter(|e| e.severity == Severity::Fatal).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    #[default]
    NotRun,
    Success,
    Failure,
}

/// The full mutable record of one case as it moves through the workflow.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseState {
    pub case_id: String,
    pub user_requirement: String,
    #[serde(default)]
    pub attachments: Vec<String>,
    pub descriptor: Option<CaseDescriptor>,
    pub plan: SimulationPlan,
    pub foamfiles: Vec<FoamFile>,
    #[serde(default)]
    pub mesh: Option<MeshPlan>,
    /// Retrieved reference material kept for later prompts.
    #[serde(default)]
    pub tutorial_reference: String,
    #[serde(default)]
    pub allrun_reference: String,
    pub execution_logs: String,
    pub run_status: RunStatus,
    pub history: Vec<AttemptRecord>,
    pub loop_count: u32,
    /// Static check of the current files; attached to the next reviewer prompt.
    #[serde(default)]
    pub lint: LintReport,
    /// Error records extracted from the most recent run.
    #[serde(default)]
    pub last_errors: Vec<ErrorRecord>,
    #[serde(default)]
    pub hpc_script: Option<String>,
    #[serde(default)]
    pub visualization_artifacts: Vec<String>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub token_usage: u64,
    /// Set when an agent or backend error terminated the run.
    #[serde(default)]
    pub fault: Option<String>,
    /// Errors of individual tool calls made through the service.
    #[serde(default)]
    pub tool_errors: Vec<String>,
}

impl CaseState {
    pub fn new(case_id: impl Into<String>, requirement: impl Into<String>) -> Self {
        CaseState { case_id: case_id.into(), user_requirement: requirement.into(), ..Default::default() }
    }

    pub fn file(&self, folder: &str, file: &str) -> Option<&FoamFile> {
        let id = file_id(folder, file);
        self.foamfiles.iter().find(|f| f.id() == id)
    }

    /// Compact JSON list of files, the form used inside reviewer prompts.
    pub fn foamfiles_json(&self) -> String {
        serde_json::to_string(&self.foamfiles).expect("foamfiles serialize")
    }

    pub fn add_tokens(&mut self, prompt: u64, completion: u64) {
        self.prompt_tokens += prompt;
        self.completion_tokens += completion;
        self.token_usage = self.prompt_tokens + self.completion_tokens;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> VocabularySets {
        VocabularySets::from_json(
            r#"{"case_domain":["incompressible"],"case_category":["cavity"],"case_solver":["icoFoam","simpleFoam"]}"#,
        )
        .unwrap()
    }

    fn desc(name: &str, solver: &str) -> CaseDescriptor {
        CaseDescriptor {
            case_name: name.into(),
            case_domain: "incompressible".into(),
            case_category: "cavity".into(),
            case_solver: solver.into(),
        }
    }

    #[test]
    fn accepts_in_vocabulary_solver() {
        let d = validate_descriptor(desc("cavity", "icoFoam"), &vocab()).unwrap();
        assert_eq!(d.case_solver, "icoFoam");
    }

    #[test]
    fn rejects_unknown_solver() {
        let err = validate_descriptor(desc("cavity", "magicFoam"), &vocab()).unwrap_err();
        assert!(matches!(err, CaseError::UnknownVocabularyTerm { field: "case_solver", ref value } if value == "magicFoam"));
    }

    #[test]
    fn rejects_path_separator_in_name() {
        let err = validate_descriptor(desc("a/b", "icoFoam"), &vocab()).unwrap_err();
        assert!(matches!(err, CaseError::InvalidCaseName(_)));
        assert!(validate_descriptor(desc("", "icoFoam"), &vocab()).is_err());
    }

    #[test]
    fn empty_vocabulary_is_rejected() {
        let mut v = vocab();
        v.solvers.clear();
        assert!(matches!(validate_descriptor(desc("c", "icoFoam"), &v), Err(CaseError::EmptyVocabulary(_))));
    }

    #[test]
    fn bundled_vocabulary_loads() {
        let v = VocabularySets::bundled();
        v.check_nonempty().unwrap();
        assert!(v.solvers.contains("icoFoam"));
    }

    #[test]
    fn plan_validation_catches_duplicates_and_dangling_deps() {
        let plan = SimulationPlan {
            files: vec![PlannedFile::new("system", "controlDict"), PlannedFile::new("system", "controlDict")],
            source_reference: String::new(),
        };
        assert!(matches!(plan.validate(), Err(CaseError::DuplicateFile(_))));
        let plan = SimulationPlan {
            files: vec![PlannedFile::new("0", "U").with_deps(&["constant/nope"])],
            source_reference: String::new(),
        };
        assert!(matches!(plan.validate(), Err(CaseError::UnknownDependency { .. })));
    }

    #[test]
    fn upsert_replaces_or_appends() {
        let mut files = vec![FoamFile::new("system", "controlDict", "a")];
        assert!(upsert_file(&mut files, FoamFile::new("system", "controlDict", "b")));
        assert!(!upsert_file(&mut files, FoamFile::new("0", "k", "c")));
        assert_eq!(files.len(), 2);
        assert_eq!(files[0].content, "b");
    }
}
