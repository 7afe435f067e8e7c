//! Inputs shared by the criterion benches.

use std::collections::BTreeMap;

use foamforge_core::case::FoamFile;
use foamforge_core::index::{render_tree, CaseRecord};
use foamforge_core::scenario::{cavity_descriptor, cavity_record};
use foamforge_core::CaseDescriptor;

/// The clean cavity case as separate files, Allrun excluded.
pub fn cavity_files() -> Vec<FoamFile> {
    cavity_record()
        .file_contents
        .into_iter()
        .filter_map(|(id, content)| {
            let (folder, file) = id.rsplit_once('/')?;
            Some(FoamFile::new(folder, file, content))
        })
        .collect()
}

/// `n` cavity variants with distinct names, solvers and file text, so the
/// indices hold that many genuinely different entries.
pub fn synthetic_records(n: usize) -> Vec<CaseRecord> {
    const SOLVERS: [&str; 4] = ["icoFoam", "pisoFoam", "pimpleFoam", "simpleFoam"];
    let base = cavity_record();
    (0..n)
        .map(|i| {
            let solver = SOLVERS[i % SOLVERS.len()];
            let name = format!("variant{i:03}");
            let file_contents: BTreeMap<String, String> = base
                .file_contents
                .iter()
                .map(|(k, v)| (k.clone(), format!("{}\n// {name} {solver} {}\n", v.replace("icoFoam", solver), i * 7919 % 1000)))
                .collect();
            CaseRecord {
                case_id: format!("incompressible/{solver}/{name}"),
                metadata: CaseDescriptor { case_name: name.clone(), case_solver: solver.into(), ..cavity_descriptor() },
                directory_structure: render_tree(&name, file_contents.keys().map(String::as_str)),
                execution_script: file_contents.get("Allrun").cloned().unwrap_or_default(),
                file_contents,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_populated() {
        assert!(cavity_files().len() >= 5);
        let records = synthetic_records(8);
        assert_eq!(records.len(), 8);
        assert_ne!(records[0].file_contents, records[1].file_contents);
    }
}
