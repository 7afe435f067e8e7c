use serde::{Deserialize, Serialize};

use super::requirement::{pinned_values, PinnedValue};
use super::{slots, AgentContext, AgentError};
use crate::case::{upsert_file, AttemptRecord, CaseState, FoamFile, RunStatus};
use crate::exec::{render_errors, tail_lines, TAIL_LINES};
use crate::foam::{parse, serialize, Dictionary, Entry, Item};
use crate::llm::FoamFileList;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewAnalysis {
    pub analysis_text: String,
    /// Only files whose content changes.
    pub proposed_modifications: Vec<FoamFile>,
    /// `file:key` entries the guard restored because the requirement pins them.
    #[serde(default)]
    pub reverted: Vec<String>,
}

/// The history block for reviewer prompts, one rendered entry per attempt.
pub fn render_history(cx: &AgentContext, history: &[AttemptRecord]) -> Result<String, AgentError> {
    let mut parts = Vec::new();
    for a in history {
        let (_, text) = cx.prompts.render(
            "history_entry",
            &slots([
                ("attempt_number", a.attempt_number.to_string()),
                ("error_logs", a.error_logs.clone()),
                ("review_content", a.review_analysis.clone()),
            ]),
        )?;
        parts.push(text);
    }
    Ok(parts.join("\n"))
}

fn current_error_logs(state: &CaseState) -> String {
    let mut logs = match state.history.last() {
        Some(a) if !a.error_logs.trim().is_empty() => a.error_logs.clone(),
        _ if !state.last_errors.is_empty() => render_errors(&state.last_errors),
        _ => tail_lines(&state.execution_logs, TAIL_LINES),
    };
    if !state.lint.is_clean() {
        logs.push_str("\n\nStatic consistency check findings:\n");
        logs.push_str(&state.lint.render());
    }
    logs
}

fn numbers(items: &[Item]) -> Vec<f64> {
    let mut out = Vec::new();
    for it in items {
        match it {
            Item::Number(n) => out.extend(n.parse::<f64>().ok()),
            Item::List(l) | Item::Dimensions(l) => out.extend(numbers(l)),
            _ => {}
        }
    }
    out
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn guard_dict(original: &Dictionary, modified: &mut Dictionary, pins: &[PinnedValue], path: &str, out: &mut Vec<String>) {
    for entry in &mut modified.entries {
        match entry {
            Entry::Value { key, items } => {
                let Some(orig) = original.get_items(key) else { continue };
                let pinned = pins
                    .iter()
                    .any(|p| p.key.eq_ignore_ascii_case(key) && numbers(orig).iter().any(|v| same(*v, p.value)));
                if pinned && items.as_slice() != orig {
                    *items = orig.to_vec();
                    out.push(format!("{path}:{key}"));
                }
            }
            Entry::Dict { key, dict } => {
                if let Some(orig) = original.get_dict(key) {
                    let sub = format!("{path}/{key}");
                    guard_dict(orig, dict, pins, &sub, out);
                }
            }
            _ => {}
        }
    }
}

/// Restores any entry whose key and original value the requirement pins
/// (e.g. `endTime 0.5`) but which a modification changed. Files that do
/// not parse are left untouched. Returns the restored `file:key` paths.
pub fn guard_pinned_values(requirement: &str, current: &[FoamFile], mods: &mut [FoamFile]) -> Vec<String> {
    let pins = pinned_values(requirement);
    let mut reverted = Vec::new();
    if pins.is_empty() {
        return reverted;
    }
    for m in mods.iter_mut() {
        let Some(orig) = current.iter().find(|f| f.id() == m.id()) else { continue };
        let (Ok(orig_tree), Ok(mut new_tree)) = (parse(&orig.content, None), parse(&m.content, None)) else { continue };
        let before = reverted.len();
        guard_dict(&orig_tree.body, &mut new_tree.body, &pins, &m.id(), &mut reverted);
        if reverted.len() > before {
            m.content = serialize(&new_tree);
        }
    }
    reverted
}

/// Analyses the latest failure and proposes corrected files.
///
/// The analysis uses the initial error template on the first failure and the
/// subsequent template (with the rendered history of earlier attempts)
/// afterwards; a second call with the correction template returns files.
/// The analysis is stored on the latest attempt record.
pub fn review(cx: &AgentContext, state: &mut CaseState) -> Result<ReviewAnalysis, AgentError> {
    if state.run_status != RunStatus::Failure {
        return Err(AgentError::Precondition(format!("review needs a failed run, status is {:?}", state.run_status)));
    }
    let error_logs = current_error_logs(state);
    if error_logs.trim().is_empty() {
        return Err(AgentError::Precondition("review needs error logs".into()));
    }
    let foamfiles = state.foamfiles_json();
    let earlier = &state.history[..state.history.len().saturating_sub(1)];
    let analysis = if earlier.is_empty() {
        cx.text(
            state,
            "error_analysis_initial",
            slots([
                ("tutorial_reference", state.tutorial_reference.clone()),
                ("foamfiles", foamfiles.clone()),
                ("error_logs", error_logs.clone()),
                ("user_requirement", state.user_requirement.clone()),
            ]),
        )?
    } else {
        let history = render_history(cx, earlier)?;
        cx.text(
            state,
            "error_analysis_subsequent",
            slots([
                ("tutorial_reference", state.tutorial_reference.clone()),
                ("foamfiles", foamfiles.clone()),
                ("error_logs", error_logs.clone()),
                ("history", history),
                ("user_requirement", state.user_requirement.clone()),
            ]),
        )?
    };
    if let Some(last) = state.history.last_mut() {
        last.review_analysis = analysis.clone();
    }

    let corrected: FoamFileList = cx.structured(
        state,
        "file_correction",
        slots([
            ("foamfiles", foamfiles),
            ("error_logs", error_logs),
            ("review_content", analysis.clone()),
            ("user_requirement", state.user_requirement.clone()),
        ]),
    )?;
    let mut files = corrected.into_files();
    if files.is_empty() {
        return Err(AgentError::EmptyCorrection);
    }
    let reverted = guard_pinned_values(&state.user_requirement, &state.foamfiles, &mut files);
    files.retain(|f| state.foamfiles.iter().all(|g| g.id() != f.id() || g.content != f.content));
    Ok(ReviewAnalysis { analysis_text: analysis, proposed_modifications: files, reverted })
}

/// Replaces or adds each modified file; everything else is untouched.
pub fn apply_modifications(state: &CaseState, mods: &[FoamFile]) -> CaseState {
    let mut next = state.clone();
    for m in mods {
        upsert_file(&mut next.foamfiles, m.clone());
    }
    next
}
