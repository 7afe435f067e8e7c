use std::collections::BTreeSet;

use super::{slots, AgentContext, AgentError};
use crate::case::{validate_descriptor, CaseDescriptor, CaseState, PlannedFile, SimulationPlan, VocabularySets};
use crate::index::Stage;
use crate::llm::{CaseDescription, Subtasks};

/// Text of every indexed file of a case, as `<file path="...">` blocks.
fn reference_files(cx: &AgentContext, case_id: &str) -> String {
    cx.indices
        .case_file_paths(case_id)
        .into_iter()
        .filter_map(|p| cx.indices.case_file(case_id, p).map(|c| format!("<file path=\"{p}\">\n{}\n</file>", c.trim_end())))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Classifies the requirement, retrieves a reference case and decomposes
/// the case into planned files. The descriptor, plan and reference material
/// are stored on the state.
///
/// Retrieval is a cascade: the architect-stage search over directory
/// structures proposes candidate cases, then a detail-level search
/// restricted to those candidates picks the reference case.
pub fn architect_plan(cx: &AgentContext, state: &mut CaseState) -> Result<(CaseDescriptor, SimulationPlan), AgentError> {
    let requirement = state.user_requirement.clone();
    let raw: CaseDescription = cx.structured(
        state,
        "case_description",
        slots([
            ("case_domains", VocabularySets::render_list(&cx.vocab.domains)),
            ("case_categories", VocabularySets::render_list(&cx.vocab.categories)),
            ("case_solvers", VocabularySets::render_list(&cx.vocab.solvers)),
            ("user_requirement", requirement.clone()),
        ]),
    )?;
    let descriptor = validate_descriptor(raw.into_descriptor(), cx.vocab)?;

    let query = descriptor.case_info();
    let coarse = cx.retrieve(Stage::Architect, &query, &requirement)?;
    let candidates: BTreeSet<String> = coarse.matches.iter().filter_map(|m| m.payload.case_id.clone()).collect();
    let mut reference = coarse.matches.iter().find_map(|m| m.payload.case_id.clone());
    if candidates.len() > 1 {
        let refined = cx.retrieve_within(Stage::InputWriter, &query, &requirement, &candidates)?;
        if let Some(best) = refined.matches.iter().find_map(|m| m.payload.case_id.clone()) {
            reference = Some(best);
        }
    }

    let (dir_structure, dir_counts) = match &reference {
        Some(id) => (
            cx.indices.case_structure(id).map(|p| p.content.clone()).unwrap_or_default(),
            cx.indices.case_dir_counts(id),
        ),
        None => ("None".to_string(), "None".to_string()),
    };
    if let Some(id) = &reference {
        state.tutorial_reference = reference_files(cx, id);
        state.allrun_reference = cx.indices.case_script(id).to_string();
    }

    let subtasks: Subtasks = cx.structured(
        state,
        "task_decomposition",
        slots([
            ("user_requirement", requirement.clone()),
            ("dir_structure", dir_structure),
            ("dir_counts_str", dir_counts),
        ]),
    )?;
    let plan = plan_from_subtasks(&subtasks, reference.unwrap_or_default())?;
    state.descriptor = Some(descriptor.clone());
    state.plan = plan.clone();
    Ok((descriptor, plan))
}

/// Turns subtasks into a plan. Duplicates keep their first occurrence, the
/// run script is dropped (it is always generated last), and dependencies
/// that point outside the plan are discarded.
fn plan_from_subtasks(subtasks: &Subtasks, source_reference: String) -> Result<SimulationPlan, AgentError> {
    let mut files: Vec<PlannedFile> = Vec::new();
    for s in &subtasks.subtasks {
        let mut f = s.to_planned();
        if f.folder_name == "." {
            f.folder_name.clear();
        }
        if f.folder_name.is_empty() && f.file_name.starts_with("Allrun") {
            continue;
        }
        if files.iter().all(|g| g.id() != f.id()) {
            files.push(f);
        }
    }
    if files.is_empty() {
        return Err(AgentError::EmptyPlan);
    }
    let ids: BTreeSet<String> = files.iter().map(PlannedFile::id).collect();
    for f in &mut files {
        let own = f.id();
        f.dependencies.retain(|d| ids.contains(d) && *d != own);
    }
    let plan = SimulationPlan { files, source_reference };
    plan.validate()?;
    Ok(plan)
}
