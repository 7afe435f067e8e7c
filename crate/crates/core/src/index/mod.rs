//! Tutorial knowledge base: corpus ingest, four stage-specific vector
//! indices, and exact cosine retrieval over them.

mod corpus;
mod store;
pub mod text;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{dir_counts, ingest_corpus, render_tree, CaseRecord};

use crate::case::CaseDescriptor;
use crate::config::Config;
use crate::llm::{Embedder, LlmError};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("no case directories found under {0}")]
    EmptyCorpus(String),
    #[error("embedding has {got} components, index expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {0} has not been built")]
    IndexNotBuilt(IndexKind),
    #[error("embedding failed: {0}")]
    Embed(#[from] LlmError),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt index store: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    TutorialStructure,
    TutorialDetails,
    ExecutionScripts,
    CommandDocumentation,
}

impl IndexKind {
    pub const ALL: [IndexKind; 4] = [
        IndexKind::TutorialStructure,
        IndexKind::TutorialDetails,
        IndexKind::ExecutionScripts,
        IndexKind::CommandDocumentation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::TutorialStructure => "tutorial_structure",
            IndexKind::TutorialDetails => "tutorial_details",
            IndexKind::ExecutionScripts => "execution_scripts",
            IndexKind::CommandDocumentation => "command_documentation",
        }
    }
}

impl std::fmt::Display for IndexKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Workflow stage that issues a retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Architect,
    InputWriter,
    Runner,
    CommandHelp,
}

impl Stage {
    pub fn index_kind(self) -> IndexKind {
        match self {
            Stage::Architect => IndexKind::TutorialStructure,
            Stage::InputWriter => IndexKind::TutorialDetails,
            Stage::Runner => IndexKind::ExecutionScripts,
            Stage::CommandHelp => IndexKind::CommandDocumentation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandDoc {
    pub name: String,
    pub help: String,
}

/// Parses `name<TAB>help` lines; blank lines and `#` comments are skipped.
pub fn parse_command_docs(text: &str) -> Vec<CommandDoc> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('\t'))
        .map(|(n, h)| CommandDoc { name: n.trim().to_string(), help: h.trim().to_string() })
        .collect()
}

pub fn bundled_command_docs() -> Vec<CommandDoc> {
    parse_command_docs(include_str!("../../data/command_help.txt"))
}

/// What an index entry points back to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub kind: IndexKind,
    /// Source case; `None` for command documentation.
    pub case_id: Option<String>,
    pub metadata: Option<CaseDescriptor>,
    /// Case-relative file path for detail entries, command name for command docs.
    pub title: String,
    /// Raw material shown to the model.
    pub content: String,
}

impl Payload {
    /// Text that was embedded for this entry.
    pub fn embed_text(&self) -> String {
        let info = self.metadata.as_ref().map(CaseDescriptor::case_info).unwrap_or_default();
        match self.kind {
            IndexKind::TutorialStructure => format!("{info}\ndirectory structure:\n{}", self.content),
            IndexKind::TutorialDetails => format!("{info}\nfile: {}\n{}", self.title, self.content),
            IndexKind::ExecutionScripts => format!("{info}\nAllrun:\n{}", self.content),
            IndexKind::CommandDocumentation => format!("{}: {}", self.title, self.content),
        }
    }

    /// Identity used to collapse near-duplicate matches.
    fn dedupe_key(&self) -> String {
        self.case_id.clone().unwrap_or_else(|| format!("command:{}", self.title))
    }

    fn format(&self) -> String {
        let meta = |m: &CaseDescriptor| {
            format!(
                "<case_name>{}</case_name>\n<case_domain>{}</case_domain>\n<case_category>{}</case_category>\n<case_solver>{}</case_solver>\n",
                m.case_name, m.case_domain, m.case_category, m.case_solver
            )
        };
        let header = self.metadata.as_ref().map(meta).unwrap_or_default();
        match self.kind {
            IndexKind::TutorialStructure => {
                format!("<index>\n{header}<dir_structure>\n{}</dir_structure>\n</index>", self.content)
            }
            IndexKind::TutorialDetails => {
                format!("<index>\n{header}<file path=\"{}\">\n{}\n</file>\n</index>", self.title, self.content.trim_end())
            }
            IndexKind::ExecutionScripts => {
                format!("<index>\n{header}<allrun_script>\n{}\n</allrun_script>\n</index>", self.content.trim_end())
            }
            IndexKind::CommandDocumentation => format!("{}: {}", self.title, self.content),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub payload: Payload,
    pub score: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalParams {
    pub top_k: usize,
    /// Matches scoring below this are dropped after the top-k cut.
    pub threshold: f32,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        RetrievalParams { top_k: 5, threshold: 0.2 }
    }
}

impl From<&Config> for RetrievalParams {
    fn from(c: &Config) -> Self {
        RetrievalParams { top_k: c.top_k, threshold: c.relevance_threshold }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// `None` for single-index retrieval.
    pub stage: Option<Stage>,
    /// Raw top-k by cosine, before relevance filtering.
    pub candidates: Vec<Match>,
    /// Candidates that pass the relevance filter, best first.
    pub matches: Vec<Match>,
    pub formatted_context: String,
}

impl RetrievalResult {
    pub fn top(&self) -> Option<&Match> {
        self.matches.first()
    }
}

/// Flat store of equal-length vectors with their payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    vectors: Vec<f32>,
    payloads: Vec<Payload>,
}

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        dot += f64::from(*x) * f64::from(*y);
        na += f64::from(*x) * f64::from(*x);
        nb += f64::from(*y) * f64::from(*y);
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0) as f32
}

impl VectorIndex {
    pub fn new(dim: usize) -> Self {
        VectorIndex { dim, vectors: Vec::new(), payloads: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn payload(&self, i: usize) -> &Payload {
        &self.payloads[i]
    }

    pub fn payloads(&self) -> &[Payload] {
        &self.payloads
    }

    pub fn push(&mut self, vector: Vec<f32>, payload: Payload) -> Result<(), IndexError> {
        if vector.len() != self.dim {
            return Err(IndexError::DimensionMismatch { expected: self.dim, got: vector.len() });
        }
        self.vectors.extend(vector);
        self.payloads.push(payload);
        Ok(())
    }

    /// Exact top-k by cosine over entries accepted by `keep`. Ties keep insertion order.
    pub fn search(&self, query: &[f32], top_k: usize, keep: impl Fn(&Payload) -> bool) -> Vec<Match> {
        let mut scored: Vec<(usize, f32)> =
            (0..self.len()).filter(|&i| keep(&self.payloads[i])).map(|i| (i, cosine(query, self.vector(i)))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(top_k);
        scored.into_iter().map(|(i, score)| Match { payload: self.payloads[i].clone(), score }).collect()
    }
}

/// The four stage-specific indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    dim: usize,
    indices: BTreeMap<IndexKind, VectorIndex>,
}

impl IndexSet {
    /// A set with no indices; every retrieval fails with `IndexNotBuilt`.
    pub fn empty(dim: usize) -> Self {
        IndexSet { dim, indices: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, kind: IndexKind) -> Result<&VectorIndex, IndexError> {
        self.indices.get(&kind).ok_or(IndexError::IndexNotBuilt(kind))
    }

    pub fn insert(&mut self, kind: IndexKind, index: VectorIndex) -> Result<(), IndexError> {
        if index.dim != self.dim {
            return Err(IndexError::DimensionMismatch { expected: self.dim, got: index.dim });
        }
        self.indices.insert(kind, index);
        Ok(())
    }

    /// All entries of all indices in one index, in kind order.
    pub fn merged(&self) -> VectorIndex {
        let mut out = VectorIndex::new(self.dim);
        for idx in self.indices.values() {
            out.vectors.extend_from_slice(&idx.vectors);
            out.payloads.extend(idx.payloads.iter().cloned());
        }
        out
    }

    /// Raw content of one file of an indexed case.
    pub fn case_file(&self, case_id: &str, path: &str) -> Option<&str> {
        let idx = self.indices.get(&IndexKind::TutorialDetails)?;
        idx.payloads.iter().find(|p| p.case_id.as_deref() == Some(case_id) && p.title == path).map(|p| p.content.as_str())
    }

    /// Case-relative paths of every detail entry of a case, in index order.
    pub fn case_file_paths(&self, case_id: &str) -> Vec<&str> {
        self.indices
            .get(&IndexKind::TutorialDetails)
            .map(|idx| {
                idx.payloads.iter().filter(|p| p.case_id.as_deref() == Some(case_id)).map(|p| p.title.as_str()).collect()
            })
            .unwrap_or_default()
    }

    /// The case's `Allrun` text, empty when it has none.
    pub fn case_script(&self, case_id: &str) -> &str {
        self.indices
            .get(&IndexKind::ExecutionScripts)
            .and_then(|idx| idx.payloads.iter().find(|p| p.case_id.as_deref() == Some(case_id)))
            .map(|p| p.content.as_str())
            .unwrap_or("")
    }

    /// Per-folder file counts of an indexed case, `Allrun` included.
    pub fn case_dir_counts(&self, case_id: &str) -> String {
        let mut paths = self.case_file_paths(case_id);
        if !self.case_script(case_id).is_empty() {
            paths.push("Allrun");
        }
        dir_counts(paths.into_iter())
    }

    /// Payload of the structure entry for a case.
    pub fn case_structure(&self, case_id: &str) -> Option<&Payload> {
        let idx = self.indices.get(&IndexKind::TutorialStructure)?;
        idx.payloads.iter().find(|p| p.case_id.as_deref() == Some(case_id))
    }

    fn embed_query(&self, embedder: &dyn Embedder, query: &str, context: &str) -> Result<Vec<f32>, IndexError> {
        let text = if context.is_empty() { query.to_string() } else { format!("{query}\n{context}") };
        let v = embedder.embed(&text)?;
        if v.len() != self.dim {
            return Err(IndexError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(v)
    }

    /// Stage-aware retrieval: the stage selects exactly one index.
    pub fn retrieve(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        stage: Stage,
        context: &str,
        params: RetrievalParams,
    ) -> Result<RetrievalResult, IndexError> {
        let idx = self.get(stage.index_kind())?;
        let q = self.embed_query(embedder, query, context)?;
        Ok(finish(Some(stage), idx.search(&q, params.top_k, |_| true), params))
    }

    /// Like [`IndexSet::retrieve`] but only over entries from the given cases.
    pub fn retrieve_within(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        stage: Stage,
        context: &str,
        params: RetrievalParams,
        case_ids: &BTreeSet<String>,
    ) -> Result<RetrievalResult, IndexError> {
        let idx = self.get(stage.index_kind())?;
        let q = self.embed_query(embedder, query, context)?;
        let keep = |p: &Payload| p.case_id.as_ref().is_some_and(|c| case_ids.contains(c));
        Ok(finish(Some(stage), idx.search(&q, params.top_k, keep), params))
    }

    /// Baseline retrieval over one merged index of every payload.
    pub fn retrieve_single_index(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        context: &str,
        params: RetrievalParams,
    ) -> Result<RetrievalResult, IndexError> {
        if self.indices.is_empty() {
            return Err(IndexError::IndexNotBuilt(IndexKind::TutorialStructure));
        }
        let q = self.embed_query(embedder, query, context)?;
        Ok(finish(None, self.merged().search(&q, params.top_k, |_| true), params))
    }
}

/// Relevance filter: drop low scores, then keep only the best match per case.
fn filter_relevant(candidates: &[Match], threshold: f32) -> Vec<Match> {
    let mut seen = BTreeSet::new();
    candidates
        .iter()
        .filter(|m| m.score >= threshold)
        .filter(|m| seen.insert(m.payload.dedupe_key()))
        .cloned()
        .collect()
}

fn finish(stage: Option<Stage>, candidates: Vec<Match>, params: RetrievalParams) -> RetrievalResult {
    let matches = filter_relevant(&candidates, params.threshold);
    let formatted_context = matches.iter().map(|m| m.payload.format()).collect::<Vec<_>>().join("\n\n");
    RetrievalResult { stage, candidates, matches, formatted_context }
}

/// Builds all four indices with the bundled command documentation.
pub fn build_index_set(records: &[CaseRecord], embedder: &dyn Embedder, dim: usize) -> Result<IndexSet, IndexError> {
    build_index_set_with(records, &bundled_command_docs(), embedder, dim)
}

pub fn build_index_set_with(
    records: &[CaseRecord],
    commands: &[CommandDoc],
    embedder: &dyn Embedder,
    dim: usize,
) -> Result<IndexSet, IndexError> {
    let mut set = IndexSet::empty(dim);
    let mut by_kind: BTreeMap<IndexKind, Vec<Payload>> = BTreeMap::new();
    for r in records {
        let base = |kind, title: &str, content: &str| Payload {
            kind,
            case_id: Some(r.case_id.clone()),
            metadata: Some(r.metadata.clone()),
            title: title.to_string(),
            content: content.to_string(),
        };
        by_kind.entry(IndexKind::TutorialStructure).or_default().push(base(
            IndexKind::TutorialStructure,
            &r.metadata.case_name,
            &r.directory_structure,
        ));
        for (path, content) in &r.file_contents {
            if path == "Allrun" {
                continue;
            }
            by_kind.entry(IndexKind::TutorialDetails).or_default().push(base(IndexKind::TutorialDetails, path, content));
        }
        by_kind.entry(IndexKind::ExecutionScripts).or_default().push(base(
            IndexKind::ExecutionScripts,
            "Allrun",
            &r.execution_script,
        ));
    }
    by_kind.entry(IndexKind::CommandDocumentation).or_default().extend(commands.iter().map(|c| Payload {
        kind: IndexKind::CommandDocumentation,
        case_id: None,
        metadata: None,
        title: c.name.clone(),
        content: c.help.clone(),
    }));

    for kind in IndexKind::ALL {
        let mut idx = VectorIndex::new(dim);
        for p in by_kind.remove(&kind).unwrap_or_default() {
            let v = embedder.embed(&p.embed_text())?;
            idx.push(v, p)?;
        }
        set.insert(kind, idx)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_mapping_is_fixed() {
        assert_eq!(Stage::Architect.index_kind(), IndexKind::TutorialStructure);
        assert_eq!(Stage::InputWriter.index_kind(), IndexKind::TutorialDetails);
        assert_eq!(Stage::Runner.index_kind(), IndexKind::ExecutionScripts);
        assert_eq!(Stage::CommandHelp.index_kind(), IndexKind::CommandDocumentation);
    }

    #[test]
    fn bundled_command_docs_parse() {
        let docs = bundled_command_docs();
        assert!(docs.len() > 40);
        assert!(docs.iter().any(|d| d.name == "gmshToFoam"));
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((cosine(&[1.0, 1.0], &[2.0, 2.0]) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn filter_drops_low_scores_and_duplicate_cases() {
        let p = |case: &str| Payload {
            kind: IndexKind::TutorialDetails,
            case_id: Some(case.into()),
            metadata: None,
            title: "f".into(),
            content: String::new(),
        };
        let c = vec![
            Match { payload: p("a"), score: 0.9 },
            Match { payload: p("a"), score: 0.8 },
            Match { payload: p("b"), score: 0.5 },
            Match { payload: p("c"), score: 0.1 },
        ];
        let kept: Vec<(String, f32)> =
            filter_relevant(&c, 0.2).into_iter().map(|m| (m.payload.case_id.unwrap(), m.score)).collect();
        assert_eq!(kept, vec![("a".into(), 0.9), ("b".into(), 0.5)]);
    }
}
