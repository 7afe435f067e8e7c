use std::path::Path;

use serde::{Deserialize, Serialize};

use super::requirement::boundary_names;
use super::{slots, AgentContext, AgentError};
use crate::case::{upsert_file, CaseState, FoamFile, PlannedFile};
use crate::llm::strip_code_fences;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshMode {
    #[default]
    Native,
    ExternalMsh,
    ExternalDicts,
    GmshScript,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub mode: MeshMode,
    pub source_path: Option<String>,
    pub boundary_names: Vec<String>,
}

/// What the meshing step contributes to a case.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshPlan {
    pub spec: MeshSpec,
    /// Shell commands that must run before the solver, in order.
    pub commands: Vec<String>,
    /// Files the meshing step adds to the case (scripts, copied dictionaries).
    pub artifacts: Vec<FoamFile>,
}

const MESH_DICTS: [&str; 2] = ["blockMeshDict", "snappyHexMeshDict"];
pub(crate) const GMSH_SCRIPT: &str = "mesh.py";
pub(crate) const GMSH_OUTPUT: &str = "mesh.msh";

fn base_name(path: &str) -> &str {
    Path::new(path).file_name().and_then(|n| n.to_str()).unwrap_or(path)
}

/// Attachment type first, then an explicit request for gmsh, else native.
pub fn select_mesh_mode(requirement: &str, attachments: &[String]) -> MeshSpec {
    let boundary_names = boundary_names(requirement);
    if let Some(msh) = attachments.iter().find(|a| a.to_ascii_lowercase().ends_with(".msh")) {
        return MeshSpec { mode: MeshMode::ExternalMsh, source_path: Some(msh.clone()), boundary_names };
    }
    if let Some(d) = attachments.iter().find(|a| MESH_DICTS.iter().any(|m| base_name(a).starts_with(m))) {
        return MeshSpec { mode: MeshMode::ExternalDicts, source_path: Some(d.clone()), boundary_names };
    }
    let mentions_gmsh = requirement
        .split(|c: char| !c.is_ascii_alphanumeric())
        .any(|w| w.eq_ignore_ascii_case("gmsh"));
    if mentions_gmsh {
        return MeshSpec { mode: MeshMode::GmshScript, source_path: None, boundary_names };
    }
    MeshSpec { mode: MeshMode::Native, source_path: None, boundary_names }
}

fn read_attachment(path: &str) -> Result<String, AgentError> {
    std::fs::read_to_string(path).map_err(|e| AgentError::io(Path::new(path), e))
}

fn drop_from_plan(state: &mut CaseState, ids: &[String]) {
    state.plan.files.retain(|f| !ids.contains(&f.id()));
    for f in &mut state.plan.files {
        f.dependencies.retain(|d| !ids.contains(d));
    }
}

/// Decides the mesh commands and artifacts for the chosen mode and adjusts
/// the plan: native meshing needs a generated `blockMeshDict`, external
/// modes remove the dictionaries they supply or make unnecessary. Nothing is
/// executed here; the commands run as part of the case's `Allrun`.
pub fn prepare_mesh(cx: &AgentContext, state: &mut CaseState, spec: &MeshSpec) -> Result<MeshPlan, AgentError> {
    let mut plan = MeshPlan { spec: spec.clone(), ..MeshPlan::default() };
    let has_snappy = |s: &CaseState| s.plan.contains("system", "snappyHexMeshDict") || s.file("system", "snappyHexMeshDict").is_some();
    match spec.mode {
        MeshMode::Native => {
            if !state.plan.contains("system", "blockMeshDict") {
                state.plan.files.push(PlannedFile::new("system", "blockMeshDict"));
            }
            plan.commands.push("blockMesh".into());
            if has_snappy(state) {
                plan.commands.push("snappyHexMesh -overwrite".into());
            }
        }
        MeshMode::ExternalMsh => {
            let src = spec.source_path.as_deref().ok_or_else(|| AgentError::Precondition("external mesh needs a source path".into()))?;
            let name = base_name(src).to_string();
            plan.artifacts.push(FoamFile::new("", &name, read_attachment(src)?));
            plan.commands.push(format!("gmshToFoam {name}"));
            drop_from_plan(state, &["system/blockMeshDict".to_string()]);
        }
        MeshMode::ExternalDicts => {
            let mut supplied = Vec::new();
            for a in state.attachments.clone() {
                let name = base_name(&a).to_string();
                if let Some(dict) = MESH_DICTS.iter().find(|m| name.starts_with(*m)) {
                    plan.artifacts.push(FoamFile::new("system", dict, read_attachment(&a)?));
                    supplied.push(format!("system/{dict}"));
                }
            }
            drop_from_plan(state, &supplied);
            plan.commands.push("blockMesh".into());
            if supplied.iter().any(|s| s.ends_with("snappyHexMeshDict")) || has_snappy(state) {
                plan.commands.push("snappyHexMesh -overwrite".into());
            }
        }
        MeshMode::GmshScript => {
            let names = if spec.boundary_names.is_empty() { "not specified".to_string() } else { spec.boundary_names.join(", ") };
            let text = cx.text(
                state,
                "gmsh_script",
                slots([
                    ("mesh_file", GMSH_OUTPUT.to_string()),
                    ("boundary_names", names),
                    ("user_requirement", state.user_requirement.clone()),
                ]),
            )?;
            let script = strip_code_fences(&text);
            if script.trim().is_empty() {
                return Err(AgentError::EmptyContent(GMSH_SCRIPT.into()));
            }
            plan.artifacts.push(FoamFile::new("", GMSH_SCRIPT, script));
            plan.commands.push(format!("python3 {GMSH_SCRIPT}"));
            plan.commands.push(format!("gmshToFoam {GMSH_OUTPUT}"));
            drop_from_plan(state, &["system/blockMeshDict".to_string()]);
        }
    }
    for a in &plan.artifacts {
        upsert_file(&mut state.foamfiles, a.clone());
    }
    state.mesh = Some(plan.clone());
    Ok(plan)
}

fn tokens(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

/// Makes a run script carry the mesh commands: missing ones are inserted
/// before the first line that runs the solver (or appended), and external
/// modes lose any `blockMesh` call.
pub fn ensure_mesh_commands(script: &str, mesh: &MeshPlan, solver: &str) -> String {
    let external = matches!(mesh.spec.mode, MeshMode::ExternalMsh | MeshMode::GmshScript);
    let mut lines: Vec<String> = script
        .lines()
        .filter(|l| !(external && !l.trim_start().starts_with('#') && tokens(l).contains(&"blockMesh")))
        .map(str::to_string)
        .collect();
    let uses_run_functions = script.contains("RunFunctions");
    let present = |lines: &[String], cmd: &str| {
        let want = tokens(cmd);
        lines.iter().any(|l| {
            let have = tokens(l);
            !l.trim_start().starts_with('#') && want.iter().all(|w| have.contains(w))
        })
    };
    let mut missing = Vec::new();
    for cmd in &mesh.commands {
        if !present(&lines, cmd) {
            missing.push(if uses_run_functions {
                format!("runApplication {cmd}")
            } else {
                let program = cmd.split_whitespace().next().unwrap_or(cmd);
                format!("{cmd} > log.{program} 2>&1")
            });
        }
    }
    if missing.is_empty() {
        return lines.join("\n") + if script.ends_with('\n') { "\n" } else { "" };
    }
    let solver_line = lines
        .iter()
        .position(|l| !l.trim_start().starts_with('#') && l.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).any(|w| w == solver));
    let at = solver_line.unwrap_or(lines.len());
    for (k, m) in missing.into_iter().enumerate() {
        lines.insert(at + k, m);
    }
    lines.join("\n") + "\n"
}
