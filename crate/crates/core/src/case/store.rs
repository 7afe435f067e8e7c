use std::fs;
use std::path::{Path, PathBuf};

use super::{CaseError, CaseState};

/// `<workdir>/<case_id>/case`, where the OpenFOAM files are written.
pub fn case_dir(workdir: &Path, case_id: &str) -> PathBuf {
    workdir.join(case_id).join("case")
}

pub fn state_path(workdir: &Path, case_id: &str) -> PathBuf {
    workdir.join(case_id).join("state.json")
}

pub fn save_state(workdir: &Path, state: &CaseState) -> Result<PathBuf, CaseError> {
    let path = state_path(workdir, &state.case_id);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CaseError::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(state).expect("case state serializes");
    // Write-then-rename so a crash never leaves a truncated state document.
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| CaseError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| CaseError::io(&path, e))?;
    Ok(path)
}

pub fn load_state(workdir: &Path, case_id: &str) -> Result<CaseState, CaseError> {
    let path = state_path(workdir, case_id);
    let text = fs::read_to_string(&path).map_err(|e| CaseError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|source| CaseError::Json { path: path.display().to_string(), source })
}

/// Writes every file of the state verbatim under the case directory.
/// Run scripts get the executable bit.
pub fn materialize(workdir: &Path, state: &CaseState) -> Result<PathBuf, CaseError> {
    let root = case_dir(workdir, &state.case_id);
    fs::create_dir_all(&root).map_err(|e| CaseError::io(&root, e))?;
    for f in &state.foamfiles {
        let dir = if f.folder_name.is_empty() { root.clone() } else { root.join(&f.folder_name) };
        fs::create_dir_all(&dir).map_err(|e| CaseError::io(&dir, e))?;
        let path = dir.join(&f.file_name);
        fs::write(&path, &f.content).map_err(|e| CaseError::io(&path, e))?;
        if f.is_executable_script() {
            set_executable(&path)?;
        }
    }
    Ok(root)
}

#[cfg(unix)]
fn set_executable(path: &Path) -> Result<(), CaseError> {
    use std::os::unix::fs::PermissionsExt;
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).map_err(|e| CaseError::io(path, e))
}

#[cfg(not(unix))]
fn set_executable(_path: &Path) -> Result<(), CaseError> {
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{FoamFile, RunStatus};

    #[test]
    fn state_round_trips_and_files_materialize() {
        let dir = tempfile::tempdir().unwrap();
        let mut state = CaseState::new("c1", "lid driven cavity");
        state.foamfiles.push(FoamFile::new("system", "controlDict", "application icoFoam;\n"));
        state.foamfiles.push(FoamFile::new("", "Allrun", "#!/bin/sh\n"));
        state.run_status = RunStatus::Failure;
        save_state(dir.path(), &state).unwrap();
        assert_eq!(load_state(dir.path(), "c1").unwrap(), state);

        let root = materialize(dir.path(), &state).unwrap();
        assert_eq!(fs::read_to_string(root.join("system/controlDict")).unwrap(), "application icoFoam;\n");
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let mode = fs::metadata(root.join("Allrun")).unwrap().permissions().mode();
            assert_eq!(mode & 0o111, 0o111);
        }
    }
}
