use std::path::Path;

use super::requirement::VisualizationRequest;
use super::{slots, AgentContext, AgentError};
use crate::case::{CaseState, FoamFile, RunStatus};
use crate::exec::{extract_errors, render_errors, tail_lines, Executor, TAIL_LINES};
use crate::index::render_tree;
use crate::llm::strip_code_fences;

pub const VISUALIZATION_SCRIPT: &str = "visualize.py";

fn pngs(case_dir: &Path) -> Vec<String> {
    let mut out: Vec<String> = std::fs::read_dir(case_dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().to_string())
        .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
        .collect();
    out.sort();
    out
}

/// Writes and runs a plotting script in `case_dir`, regenerating it with the
/// previous script and its errors until the requested image exists or the
/// attempt budget runs out. Returns the image names found in the case
/// directory; they are also recorded on the state.
pub fn visualize(
    cx: &AgentContext,
    state: &mut CaseState,
    executor: &dyn Executor,
    case_dir: &Path,
    request: &VisualizationRequest,
) -> Result<Vec<String>, AgentError> {
    if state.run_status != RunStatus::Success {
        return Err(AgentError::Precondition("visualization needs a successful run".into()));
    }
    let name = state.descriptor.as_ref().map(|d| d.case_name.clone()).unwrap_or_else(|| state.case_id.clone());
    let ids: Vec<String> = state.foamfiles.iter().map(FoamFile::id).collect();
    let dir_structure = render_tree(&name, ids.iter().map(String::as_str));
    let output = request.output_file();
    let attempts = cx.config.visualization_max_attempts.max(1);
    let mut previous: Option<(String, String)> = None;

    for _ in 0..attempts {
        let previous_error_section = match &previous {
            Some((script, errors)) => {
                cx.prompts
                    .render("visualization_retry", &slots([("error_logs", errors.clone()), ("previous_script", script.clone())]))?
                    .1
            }
            None => String::new(),
        };
        let text = cx.text(
            state,
            "visualization",
            slots([
                ("backend", cx.config.visualization_backend.library_name().to_string()),
                ("output_name", output.clone()),
                ("time", request.time.as_ref().map(|t| t.describe()).unwrap_or_else(|| "latest".into())),
                ("user_requirement", state.user_requirement.clone()),
                ("quantity", request.quantity.clone()),
                ("plane", request.plane.clone().unwrap_or_else(|| "none".into())),
                ("dir_structure", dir_structure.clone()),
                ("previous_error_section", previous_error_section),
            ]),
        )?;
        let script = strip_code_fences(&text) + "\n";
        let path = case_dir.join(VISUALIZATION_SCRIPT);
        std::fs::write(&path, &script).map_err(|e| AgentError::io(&path, e))?;
        let result = executor.run_script(case_dir, VISUALIZATION_SCRIPT)?;
        if result.is_success() && case_dir.join(&output).is_file() {
            let images = pngs(case_dir);
            for img in &images {
                if !state.visualization_artifacts.contains(img) {
                    state.visualization_artifacts.push(img.clone());
                }
            }
            return Ok(images);
        }
        let errors = if result.is_success() {
            format!("the script finished but {output} was not written")
        } else {
            let records = extract_errors(&result);
            if records.is_empty() { tail_lines(&result.combined_logs(), TAIL_LINES) } else { render_errors(&records) }
        };
        previous = Some((script, errors));
    }
    Err(AgentError::VisualizationExhausted { attempts })
}
