use super::mesh::ensure_mesh_commands;
use super::{slots, AgentContext, AgentError};
use crate::case::{generation_order, upsert_file, CaseDescriptor, CaseState, FoamFile, VocabularySets};
use crate::foam::lint_case_with;
use crate::index::{render_tree, Stage};
use crate::llm::{strip_code_fences, CommandList};

fn descriptor(state: &CaseState) -> Result<CaseDescriptor, AgentError> {
    state.descriptor.clone().ok_or_else(|| AgentError::Precondition("the case has not been classified yet".into()))
}

/// Reference text for one file: the same file of the reference case when it
/// has one, else the best detail-level retrieval hit.
fn similar_file_text(cx: &AgentContext, state: &CaseState, folder: &str, file: &str) -> Result<String, AgentError> {
    let id = crate::case::file_id(folder, file);
    if let Some(text) = cx.indices.case_file(&state.plan.source_reference, &id) {
        return Ok(text.to_string());
    }
    let info = state.descriptor.as_ref().map(CaseDescriptor::case_info).unwrap_or_default();
    let r = cx.retrieve(Stage::InputWriter, &format!("file: {id}\n{info}"), &state.user_requirement)?;
    if let Some(m) = r.matches.iter().find(|m| m.payload.title == id) {
        return Ok(m.payload.content.clone());
    }
    Ok(if r.formatted_context.is_empty() { "None".to_string() } else { r.formatted_context })
}

/// Generates one file. `prior` is the list of files already generated, in
/// order; it is embedded in the prompt only in file-dependency mode.
pub fn generate_file(
    cx: &AgentContext,
    state: &mut CaseState,
    folder: &str,
    file: &str,
    prior: &[FoamFile],
) -> Result<FoamFile, AgentError> {
    let similar = similar_file_text(cx, state, folder, file)?;
    let written_section = if cx.config.file_dependency_enabled && !prior.is_empty() {
        let written = serde_json::to_string(prior).expect("files serialize");
        cx.prompts.render("file_generation_context", &slots([("written_files", written)]))?.1
    } else {
        String::new()
    };
    let text = cx.text(
        state,
        "file_generation",
        slots([
            ("file_name", file.to_string()),
            ("folder_name", folder.to_string()),
            ("case_solvers", VocabularySets::render_list(&cx.vocab.solvers)),
            ("user_requirement", state.user_requirement.clone()),
            ("similar_file_text", similar),
            ("written_files_section", written_section),
        ]),
    )?;
    let content = strip_code_fences(&text);
    if content.trim().is_empty() {
        return Err(AgentError::EmptyContent(crate::case::file_id(folder, file)));
    }
    Ok(FoamFile::new(folder, file, content + "\n"))
}

fn python_list(items: impl Iterator<Item = String>) -> String {
    format!("[{}]", items.map(|s| format!("'{s}'")).collect::<Vec<_>>().join(", "))
}

/// Chooses the commands and writes the `Allrun` script for the current files.
pub fn generate_allrun(cx: &AgentContext, state: &mut CaseState) -> Result<FoamFile, AgentError> {
    let desc = descriptor(state)?;
    let case_info = desc.case_info();
    let ids: Vec<String> = state.foamfiles.iter().filter(|f| f.file_name != "Allrun").map(FoamFile::id).collect();
    let dir_structure = render_tree(&desc.case_name, ids.iter().map(String::as_str));
    let scripts = cx.retrieve(Stage::Runner, &case_info, &state.user_requirement)?;
    let allrun_reference = if !scripts.formatted_context.is_empty() {
        scripts.formatted_context
    } else if !state.allrun_reference.is_empty() {
        state.allrun_reference.clone()
    } else {
        "None".to_string()
    };

    let chosen: CommandList = cx.structured(
        state,
        "command_generation",
        slots([
            ("commands", python_list(cx.commands.iter().map(|c| c.name.clone()))),
            ("dir_structure", dir_structure.clone()),
            ("case_info", case_info.clone()),
            ("allrun_reference", allrun_reference.clone()),
        ]),
    )?;
    let mut help = Vec::new();
    for name in &chosen.0 {
        let program = name.split_whitespace().next().unwrap_or(name);
        match cx.commands.iter().find(|c| c.name == program) {
            Some(doc) => help.push(format!("{}: {}", doc.name, doc.help)),
            None => {
                let r = cx.retrieve(Stage::CommandHelp, program, "")?;
                if let Some(m) = r.matches.first() {
                    help.push(format!("{}: {}", m.payload.title, m.payload.content));
                }
            }
        }
    }

    let text = cx.text(
        state,
        "allrun_generation",
        slots([
            ("commands_help", help.join("\n")),
            ("allrun_reference", allrun_reference),
            ("user_requirement", state.user_requirement.clone()),
            ("dir_structure", dir_structure),
            ("case_info", case_info),
        ]),
    )?;
    let mut script = strip_code_fences(&text);
    if script.trim().is_empty() {
        return Err(AgentError::EmptyContent("Allrun".into()));
    }
    if !script.starts_with("#!") {
        script = format!("#!/bin/sh\n{script}");
    }
    if let Some(mesh) = &state.mesh {
        script = ensure_mesh_commands(&script, mesh, &desc.case_solver);
    }
    if !script.ends_with('\n') {
        script.push('\n');
    }
    Ok(FoamFile::new("", "Allrun", script))
}

/// Re-lints the state's files; mesh boundary names stand in for a mesh
/// boundary list when the case has none of its own.
pub fn relint(state: &mut CaseState) {
    let extra = state.mesh.as_ref().map(|m| m.spec.boundary_names.clone()).unwrap_or_default();
    state.lint = lint_case_with(&state.foamfiles, state.descriptor.as_ref(), &extra);
}

/// Generates every planned file in generation order, then the `Allrun`
/// script, stores them on the state and lints the result.
pub fn write_inputs(cx: &AgentContext, state: &mut CaseState) -> Result<Vec<FoamFile>, AgentError> {
    descriptor(state)?;
    if state.plan.files.is_empty() {
        return Err(AgentError::EmptyPlan);
    }
    let order = generation_order(&state.plan, cx.config.file_dependency_enabled)?;
    let mut written: Vec<FoamFile> = Vec::new();
    for planned in &order {
        let f = generate_file(cx, state, &planned.folder_name, &planned.file_name, &written)?;
        upsert_file(&mut state.foamfiles, f.clone());
        written.push(f);
    }
    let allrun = generate_allrun(cx, state)?;
    upsert_file(&mut state.foamfiles, allrun.clone());
    written.push(allrun);
    relint(state);
    Ok(written)
}
