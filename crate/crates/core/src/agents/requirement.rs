//! Best-effort extraction of structured hints from free-text requirements.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

/// Boundary-condition type words that are never patch names.
const TYPE_WORDS: &[&str] = &[
    "empty", "wall", "patch", "symmetry", "symmetryPlane", "cyclic", "wedge", "slip", "noSlip", "fixedValue",
    "zeroGradient", "freestream", "inletOutlet",
];
const BOUNDARY_CUES: &[&str] = &["boundar", "patch", "wall", "face", "surface", "named", "inlet", "outlet"];

fn sentences(text: &str) -> Vec<String> {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    static SPLIT: OnceLock<Regex> = OnceLock::new();
    re(&SPLIT, r"\.\s+|\.$").split(&joined).map(str::to_string).filter(|s| !s.is_empty()).collect()
}

/// Quoted identifiers in sentences that talk about boundaries, in first-seen
/// order, minus boundary-condition type words.
pub fn boundary_names(requirement: &str) -> Vec<String> {
    static QUOTED: OnceLock<Regex> = OnceLock::new();
    let quoted = re(&QUOTED, r#"["'`]([A-Za-z_][A-Za-z0-9_]*)["'`]"#);
    let mut out: Vec<String> = Vec::new();
    for s in sentences(requirement) {
        let lower = s.to_lowercase();
        if !BOUNDARY_CUES.iter().any(|c| lower.contains(c)) {
            continue;
        }
        for c in quoted.captures_iter(&s) {
            let name = c[1].to_string();
            if !TYPE_WORDS.contains(&name.as_str()) && !out.contains(&name) {
                out.push(name);
            }
        }
    }
    out
}

/// A `keyword value` pair the requirement fixes, e.g. `endTime 0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedValue {
    pub key: String,
    pub value: f64,
}

/// Identifier immediately followed (optionally via `=`, `:`, `of`, `is`,
/// `to`, or a parenthesised alias) by a number.
pub fn pinned_values(requirement: &str) -> Vec<PinnedValue> {
    static PIN: OnceLock<Regex> = OnceLock::new();
    let pin = re(
        &PIN,
        r"(?i)\b([A-Za-z_][A-Za-z0-9_]*)\)?\s*(?:=|:|\bof\b|\bis\b|\bto\b)?\s*(?:set\s+(?:as\s+\w+\s+)?with\s+a\s+value\s+of\s+)?(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\b",
    );
    let mut out: Vec<PinnedValue> = Vec::new();
    for c in pin.captures_iter(requirement) {
        let key = c[1].to_string();
        if key.chars().all(|ch| ch.is_ascii_digit()) {
            continue;
        }
        if let Ok(value) = c[2].parse::<f64>() {
            let p = PinnedValue { key, value };
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSelection {
    Latest(String),
    Value(f64),
}

impl TimeSelection {
    pub fn describe(&self) -> String {
        match self {
            TimeSelection::Latest(_) => "latest time".to_string(),
            TimeSelection::Value(v) => format!("time {v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualizationRequest {
    pub quantity: String,
    #[serde(default)]
    pub plane: Option<String>,
    #[serde(default)]
    pub time: Option<TimeSelection>,
    #[serde(default)]
    pub output_name: Option<String>,
}

impl VisualizationRequest {
    pub fn new(quantity: &str) -> Self {
        VisualizationRequest { quantity: quantity.to_string(), plane: None, time: None, output_name: None }
    }

    /// `<quantity>.png` unless an output name was given.
    pub fn output_file(&self) -> String {
        match &self.output_name {
            Some(n) if n.ends_with(".png") => n.clone(),
            Some(n) => format!("{n}.png"),
            None => {
                let safe: String =
                    self.quantity.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
                format!("{safe}.png")
            }
        }
    }
}

/// `Some` when the requirement asks for a plot or visualization.
pub fn visualization_request(requirement: &str) -> Option<VisualizationRequest> {
    static ASK: OnceLock<Regex> = OnceLock::new();
    static FIELD: OnceLock<Regex> = OnceLock::new();
    static PLANE: OnceLock<Regex> = OnceLock::new();
    if !re(&ASK, r"(?i)\b(visuali[sz]e|visuali[sz]ation|plot)\b").is_match(requirement) {
        return None;
    }
    let sentence = sentences(requirement)
        .into_iter()
        .find(|s| re(&ASK, r"(?i)\b(visuali[sz]e|visuali[sz]ation|plot)\b").is_match(s))
        .unwrap_or_default();
    let lower = sentence.to_lowercase();
    let quantity = match re(&FIELD, r#"\(\s*['"`]?([A-Za-z_][A-Za-z0-9_.]*)['"`]?\s*\)"#).captures(&sentence) {
        Some(c) => c[1].to_string(),
        None if lower.contains("pressure") => "p".into(),
        None if lower.contains("temperature") => "T".into(),
        None if lower.contains("vorticity") => "vorticity".into(),
        None if lower.contains("alpha") || lower.contains("volume fraction") => "alpha.water".into(),
        None => "U".into(),
    };
    let plane = re(&PLANE, r"(?i)\balong the ([^,.]+?)(?:\s+at\s+|,|$)").captures(&sentence).map(|c| c[1].trim().to_string());
    let time = if lower.contains("final time") || lower.contains("last time") || lower.contains("latest time") {
        Some(TimeSelection::Latest("latest".into()))
    } else {
        None
    };
    Some(VisualizationRequest { quantity, plane, time, output_name: None })
}

/// Parameters the HPC script generator needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpcConfig {
    pub cluster_name: String,
    pub account: String,
    pub nodes: u32,
    /// MPI tasks; `None` takes the case's `numberOfSubdomains`, or 1.
    pub tasks: Option<u32>,
    pub walltime: String,
    /// Extra scheduler directives written verbatim after `#SBATCH`, e.g. `-C cpu`.
    pub partition_hints: Vec<String>,
    pub job_name: String,
    pub memory: Option<String>,
    pub modules: Vec<String>,
}

impl Default for HpcConfig {
    fn default() -> Self {
        HpcConfig {
            cluster_name: String::new(),
            account: String::new(),
            nodes: 1,
            tasks: None,
            walltime: "02:00:00".into(),
            partition_hints: Vec::new(),
            job_name: "Sim".into(),
            memory: None,
            modules: Vec::new(),
        }
    }
}

/// `Some` when the requirement asks for a cluster run; fills what it can.
pub fn hpc_request(requirement: &str) -> Option<HpcConfig> {
    static ASK: OnceLock<Regex> = OnceLock::new();
    static ACCOUNT: OnceLock<Regex> = OnceLock::new();
    static TASKS: OnceLock<Regex> = OnceLock::new();
    static CLUSTER: OnceLock<Regex> = OnceLock::new();
    if !re(&ASK, r"(?i)\b(hpc|slurm|cluster)\b").is_match(requirement) {
        return None;
    }
    let mut cfg = HpcConfig::default();
    if let Some(c) = re(&ACCOUNT, r"(?i)\baccount(?:\s+number)?\s*(?:is|:|=)?\s*([A-Za-z0-9_-]+)").captures(requirement) {
        cfg.account = c[1].to_string();
    }
    if let Some(c) = re(&TASKS, r"(?i)\b(\d+)\s+(?:sub-?domains|processors|cores|tasks|ranks)\b").captures(requirement) {
        cfg.tasks = c[1].parse().ok();
    }
    if let Some(c) = re(&CLUSTER, r"(?i)\bin\s+(?:the\s+)?([A-Za-z0-9_-]+)\s+cluster\b").captures(requirement) {
        cfg.cluster_name = c[1].to_string();
    }
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARES: &str = "Simulate incompressible flow over two square obstacles. \
Use gmsh to create the computational mesh. \
The inlet boundary named \"inlet\" (left boundary at x = 0) has a uniform velocity of 1 m/s in the positive x-direction. \
The right boundary at x = 5 is the outlet named \"outlet\". \
The top and bottom walls named \"topWall\" and \"bottomWall\" respectively (y = 2.5 and y = 0) use slip boundary conditions. \
The front and back faces named \"frontAndBack\" are located at z = 0 and z = 0.1 respectively, and are designated as 'empty' for 2D simulation. \
The kinematic viscosity (nu) is set as constant with a value of 1e-05 m^2/s. \
Visualize the magnitude of velocity ('U') along the x-y plane.";

    #[test]
    fn boundary_names_from_quoted_identifiers() {
        assert_eq!(boundary_names(SQUARES), ["inlet", "outlet", "topWall", "bottomWall", "frontAndBack"]);
        assert!(boundary_names("Lid driven cavity with icoFoam.").is_empty());
    }

    #[test]
    fn pinned_values_capture_keyword_number_pairs() {
        let pins = pinned_values("Set endTime = 0.5 and deltaT 0.005. The viscosity (nu) is set as constant with a value of 0.01 m^2/s.");
        assert!(pins.contains(&PinnedValue { key: "endTime".into(), value: 0.5 }));
        assert!(pins.contains(&PinnedValue { key: "deltaT".into(), value: 0.005 }));
        assert!(pins.contains(&PinnedValue { key: "nu".into(), value: 0.01 }));
    }

    #[test]
    fn visualization_request_parsing() {
        let v = visualization_request(SQUARES).unwrap();
        assert_eq!(v.quantity, "U");
        assert_eq!(v.plane.as_deref(), Some("x-y plane"));
        assert_eq!(v.output_file(), "U.png");
        let v = visualization_request("Further visualize the pressure along the mid Z section at the final time.").unwrap();
        assert_eq!(v.quantity, "p");
        assert_eq!(v.plane.as_deref(), Some("mid Z section"));
        assert!(matches!(v.time, Some(TimeSelection::Latest(_))));
        assert!(visualization_request("Run a cavity case.").is_none());
    }

    #[test]
    fn hpc_request_parsing() {
        let r = "Perform an hpc run for this case in perlmutter cluster. My account is xxxx. Do a parallel run for this case by splitting it into 32 subdomains.";
        let c = hpc_request(r).unwrap();
        assert_eq!((c.account.as_str(), c.tasks, c.cluster_name.as_str()), ("xxxx", Some(32), "perlmutter"));
        assert!(hpc_request("Run locally.").is_none());
    }
}
