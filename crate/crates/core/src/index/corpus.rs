use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::IndexError;
use crate::case::CaseDescriptor;
use crate::foam;

/// Files larger than this are left out of the detail index.
const MAX_FILE_BYTES: u64 = 256 * 1024;

/// One tutorial case as seen by the knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    /// Path relative to the corpus root with `/` separators; unique per corpus.
    pub case_id: String,
    pub metadata: CaseDescriptor,
    pub directory_structure: String,
    /// Case-relative path to text content.
    pub file_contents: BTreeMap<String, String>,
    pub execution_script: String,
}

impl CaseRecord {
    /// Per-folder file counts, e.g. `0: 2, constant: 1, system: 4`.
    pub fn dir_counts(&self) -> String {
        dir_counts(self.file_contents.keys().map(String::as_str))
    }
}

/// Per-folder counts of case-relative paths; root files count under `.`.
pub fn dir_counts<'a>(paths: impl Iterator<Item = &'a str>) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for path in paths {
        let folder = path.rsplit_once('/').map(|(d, _)| d).unwrap_or(".");
        *counts.entry(folder).or_default() += 1;
    }
    counts.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join(", ")
}

fn is_case_dir(p: &Path) -> bool {
    p.join("system").is_dir()
}

fn skip_file(rel: &str) -> bool {
    let in_mesh = rel.contains("polyMesh/") && !rel.ends_with("polyMesh/boundary");
    in_mesh || rel.ends_with(".gz") || rel.starts_with("log.")
}

/// Finds every case directory under `root` (a directory with a `system/`
/// child) and reads it into a record. Cases are returned sorted by id.
pub fn ingest_corpus(root: &Path) -> Result<Vec<CaseRecord>, IndexError> {
    let io = |path: &Path, source: std::io::Error| IndexError::Io { path: path.display().to_string(), source };
    if !root.is_dir() {
        return Err(IndexError::EmptyCorpus(root.display().to_string()));
    }
    let mut case_dirs: Vec<PathBuf> = Vec::new();
    let mut walker = WalkDir::new(root).sort_by_file_name().into_iter();
    while let Some(entry) = walker.next() {
        let entry = entry.map_err(|e| io(root, e.into()))?;
        if entry.file_type().is_dir() && is_case_dir(entry.path()) {
            case_dirs.push(entry.path().to_path_buf());
            walker.skip_current_dir();
        }
    }
    if case_dirs.is_empty() {
        return Err(IndexError::EmptyCorpus(root.display().to_string()));
    }
    case_dirs.iter().map(|d| read_case(root, d)).collect()
}

fn read_case(root: &Path, dir: &Path) -> Result<CaseRecord, IndexError> {
    let io = |path: &Path, source: std::io::Error| IndexError::Io { path: path.display().to_string(), source };
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    let components: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    let case_name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "case".into());
    let case_id = if components.is_empty() { case_name.clone() } else { components.join("/") };

    let mut file_contents = BTreeMap::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| io(dir, e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel_file = entry.path().strip_prefix(dir).unwrap_or(entry.path()).to_string_lossy().replace('\\', "/");
        if skip_file(&rel_file) {
            continue;
        }
        let meta = entry.metadata().map_err(|e| io(entry.path(), e.into()))?;
        if meta.len() > MAX_FILE_BYTES {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(|e| io(entry.path(), e))?;
        if let Ok(text) = String::from_utf8(bytes) {
            file_contents.insert(rel_file, text);
        }
    }

    let execution_script = file_contents.get("Allrun").cloned().unwrap_or_default();
    let solver = file_contents
        .get("system/controlDict")
        .and_then(|t| foam::parse(t, None).ok())
        .and_then(|t| t.body.get_word("application").map(str::to_string));
    // Tutorial layout: <domain>/<solver>/[<category>/]<case>.
    let parents = &components[..components.len().saturating_sub(1)];
    let metadata = CaseDescriptor {
        case_name: case_name.clone(),
        case_domain: parents.first().cloned().unwrap_or_else(|| "None".into()),
        case_category: if parents.len() >= 3 { parents[parents.len() - 1].clone() } else { "None".into() },
        case_solver: solver.or_else(|| parents.get(1).cloned()).unwrap_or_else(|| "None".into()),
    };
    let directory_structure = render_tree(&case_name, file_contents.keys().map(String::as_str));
    Ok(CaseRecord { case_id, metadata, directory_structure, file_contents, execution_script })
}

/// Indented listing of the case's folders and files.
pub fn render_tree<'a>(case_name: &str, paths: impl Iterator<Item = &'a str>) -> String {
    let mut out = format!("{case_name}/\n");
    let mut open: Vec<&str> = Vec::new();
    for path in paths {
        let parts: Vec<&str> = path.split('/').collect();
        let (dirs, file) = parts.split_at(parts.len() - 1);
        let common = open.iter().zip(dirs).take_while(|(a, b)| a == b).count();
        open.truncate(common);
        for d in &dirs[common..] {
            out.push_str(&"  ".repeat(open.len() + 1));
            out.push_str(d);
            out.push_str("/\n");
            open.push(d);
        }
        out.push_str(&"  ".repeat(open.len() + 1));
        out.push_str(file[0]);
        out.push('\n');
    }
    out
}
