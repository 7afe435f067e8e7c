use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{parse, Dictionary, DictionaryTree, Entry, Item, ParseError};
use crate::case::{CaseDescriptor, FoamFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconsistencyKind {
    MissingFieldReference,
    DimensionMismatch,
    SolverMismatch,
    BoundaryPatchMismatch,
}

impl InconsistencyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InconsistencyKind::MissingFieldReference => "missing_field_reference",
            InconsistencyKind::DimensionMismatch => "dimension_mismatch",
            InconsistencyKind::SolverMismatch => "solver_mismatch",
            InconsistencyKind::BoundaryPatchMismatch => "boundary_patch_mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inconsistency {
    pub kind: InconsistencyKind,
    pub detail: String,
    pub files: Vec<String>,
}

impl std::fmt::Display for Inconsistency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {} ({})", self.kind.as_str(), self.detail, self.files.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileParseError {
    pub file: String,
    pub error: ParseError,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LintReport {
    pub inconsistencies: Vec<Inconsistency>,
    pub parse_errors: Vec<FileParseError>,
}

impl LintReport {
    pub fn is_clean(&self) -> bool {
        self.inconsistencies.is_empty() && self.parse_errors.is_empty()
    }

    /// One line per finding, suitable for appending to reviewer context.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for p in &self.parse_errors {
            out.push_str(&format!("[parse_error] {}: {}\n", p.file, p.error));
        }
        for i in &self.inconsistencies {
            out.push_str(&format!("{i}\n"));
        }
        out
    }
}

/// Patch types OpenFOAM fills in through `#includeEtc "caseDicts/setConstraintTypes"`.
const CONSTRAINT_TYPES: &[&str] =
    &["empty", "symmetryPlane", "symmetry", "wedge", "cyclic", "cyclicAMI", "cyclicACMI", "processor"];

const NON_DICT_EXTENSIONS: &[&str] = &["msh", "geo", "py", "stl", "obj", "sh", "txt", "md", "png", "csv", "json"];

/// Solution fields each solver reads from `0/`. Turbulence fields are added
/// separately from the selected RAS/LES model.
fn required_fields(solver: &str) -> &'static [&'static str] {
    match solver {
        "icoFoam" | "simpleFoam" | "pisoFoam" | "pimpleFoam" | "SRFSimpleFoam" | "SRFPimpleFoam"
        | "nonNewtonianIcoFoam" | "adjointShapeOptimizationFoam" | "porousSimpleFoam" => &["U", "p"],
        "potentialFoam" => &["U", "p"],
        "scalarTransportFoam" | "laplacianFoam" => &["T"],
        "interFoam" | "interIsoFoam" => &["U", "p_rgh", "alpha.water"],
        "buoyantFoam" | "buoyantSimpleFoam" | "buoyantPimpleFoam" | "buoyantBoussinesqSimpleFoam"
        | "buoyantBoussinesqPimpleFoam" => &["U", "p", "p_rgh", "T"],
        "rhoSimpleFoam" | "rhoPimpleFoam" | "rhoCentralFoam" | "sonicFoam" | "rhoPorousSimpleFoam" => &["U", "p", "T"],
        "dnsFoam" => &["U", "p"],
        "mhdFoam" => &["U", "p", "B", "pB"],
        "electrostaticFoam" => &["phi", "rho"],
        "solidDisplacementFoam" | "solidEquilibriumDisplacementFoam" => &["D", "T"],
        "shallowWaterFoam" => &["U", "h", "hU"],
        _ => &[],
    }
}

fn turbulence_fields(model: &str) -> &'static [&'static str] {
    match model {
        "kEpsilon" | "RNGkEpsilon" | "realizableKE" | "LaunderSharmaKE" => &["k", "epsilon", "nut"],
        "kOmega" | "kOmegaSST" | "kOmega2006" => &["k", "omega", "nut"],
        "SpalartAllmaras" => &["nuTilda", "nut"],
        "Smagorinsky" | "kEqn" | "WALE" => &["nut"],
        _ => &[],
    }
}

fn lintable(f: &FoamFile) -> bool {
    if f.is_executable_script() || f.content.starts_with("#!") {
        return false;
    }
    if let Some((_, ext)) = f.file_name.rsplit_once('.') {
        if NON_DICT_EXTENSIONS.contains(&ext) {
            return false;
        }
    }
    // Only the patch list of a polyMesh is in scope.
    !(f.folder_name.ends_with("polyMesh") && f.file_name != "boundary")
}

fn is_field_folder(folder: &str) -> bool {
    folder == "0" || folder == "0.orig"
}

/// Checks `files` for cross-file inconsistencies. Files that fail to parse
/// are reported in `parse_errors` and skipped by every rule.
pub fn lint_case(files: &[FoamFile], descriptor: Option<&CaseDescriptor>) -> LintReport {
    lint_case_with(files, descriptor, &[])
}

/// Like [`lint_case`], with patch names known from outside the dictionaries
/// (for example the physical groups of an imported Gmsh mesh).
pub fn lint_case_with(files: &[FoamFile], descriptor: Option<&CaseDescriptor>, extra_boundaries: &[String]) -> LintReport {
    let mut report = LintReport::default();
    let mut trees: BTreeMap<String, (&FoamFile, DictionaryTree)> = BTreeMap::new();
    for f in files.iter().filter(|f| lintable(f)) {
        match parse(&f.content, None) {
            Ok(t) => {
                trees.insert(f.id(), (f, t));
            }
            Err(error) => report.parse_errors.push(FileParseError { file: f.id(), error }),
        }
    }
    report.parse_errors.sort_by(|a, b| a.file.cmp(&b.file));

    let out = &mut report.inconsistencies;
    check_dimensions(&trees, out);
    check_solver(&trees, descriptor, out);
    check_fields(files, &trees, descriptor, out);
    check_boundaries(&trees, extra_boundaries, out);
    report
}

fn push(out: &mut Vec<Inconsistency>, kind: InconsistencyKind, detail: String, files: Vec<String>) {
    out.push(Inconsistency { kind, detail, files });
}

fn check_dimensions(trees: &BTreeMap<String, (&FoamFile, DictionaryTree)>, out: &mut Vec<Inconsistency>) {
    fn walk_items(items: &[Item], path: &str, id: &str, out: &mut Vec<Inconsistency>) {
        for item in items {
            match item {
                Item::Dimensions(dims) => {
                    let numeric = dims.iter().all(|d| matches!(d, Item::Number(_)));
                    if numeric && dims.len() != 7 {
                        push(
                            out,
                            InconsistencyKind::DimensionMismatch,
                            format!("'{path}' has a dimension vector with {} entries, expected 7", dims.len()),
                            vec![id.to_string()],
                        );
                    }
                }
                Item::List(inner) => walk_items(inner, path, id, out),
                Item::Dict(d) => walk_dict(d, path, id, out),
                _ => {}
            }
        }
    }
    fn walk_dict(d: &Dictionary, prefix: &str, id: &str, out: &mut Vec<Inconsistency>) {
        for e in &d.entries {
            match e {
                Entry::Value { key, items } => walk_items(items, &join(prefix, key), id, out),
                Entry::Dict { key, dict } => walk_dict(dict, &join(prefix, key), id, out),
                Entry::Bare(items) => walk_items(items, prefix, id, out),
                Entry::Directive { .. } => {}
            }
        }
    }
    fn join(prefix: &str, key: &str) -> String {
        if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}/{key}")
        }
    }
    for (id, (_, tree)) in trees {
        walk_dict(&tree.body, "", id, out);
    }
}

fn check_solver(
    trees: &BTreeMap<String, (&FoamFile, DictionaryTree)>,
    descriptor: Option<&CaseDescriptor>,
    out: &mut Vec<Inconsistency>,
) {
    let Some(desc) = descriptor else { return };
    let Some((_, cd)) = trees.get("system/controlDict") else { return };
    if let Some(app) = cd.body.get_word("application") {
        if app != desc.case_solver {
            push(
                out,
                InconsistencyKind::SolverMismatch,
                format!("controlDict application '{app}' differs from planned solver '{}'", desc.case_solver),
                vec!["system/controlDict".into()],
            );
        }
    }
}

fn check_fields(
    files: &[FoamFile],
    trees: &BTreeMap<String, (&FoamFile, DictionaryTree)>,
    descriptor: Option<&CaseDescriptor>,
    out: &mut Vec<Inconsistency>,
) {
    let solver = trees
        .get("system/controlDict")
        .and_then(|(_, t)| t.body.get_word("application").map(str::to_string))
        .or_else(|| descriptor.map(|d| d.case_solver.clone()));

    let present: BTreeSet<&str> =
        files.iter().filter(|f| is_field_folder(&f.folder_name)).map(|f| f.file_name.as_str()).collect();
    let any_field_folder = files.iter().any(|f| is_field_folder(&f.folder_name));

    let mut needed: Vec<(&str, String)> = Vec::new();
    if let Some(s) = solver.as_deref() {
        for f in required_fields(s) {
            needed.push((f, format!("solver {s}")));
        }
    }
    if let Some(model) = turbulence_model(trees) {
        for f in turbulence_fields(&model) {
            needed.push((f, format!("turbulence model {model}")));
        }
    }
    // Cases that fetch initial fields another way (mapFields, setFields from
    // a script) are not judged until at least one field file exists.
    if any_field_folder {
        let mut seen = BTreeSet::new();
        for (field, reason) in needed {
            if seen.insert(field) && !present.contains(field) {
                push(
                    out,
                    InconsistencyKind::MissingFieldReference,
                    format!("field '{field}' required by {reason} has no file in 0/"),
                    vec![format!("0/{field}")],
                );
            }
        }
    }

    if let Some((_, tp)) = trees.get("constant/transportProperties") {
        let model = tp.body.get_word("transportModel").or_else(|| tp.body.get_word("viscosityModel"));
        if matches!(model, Some("Newtonian") | Some("constant")) && !tp.body.contains_key("nu") {
            push(
                out,
                InconsistencyKind::MissingFieldReference,
                "Newtonian transportProperties does not define 'nu'".into(),
                vec!["constant/transportProperties".into()],
            );
        }
    }
}

fn turbulence_model(trees: &BTreeMap<String, (&FoamFile, DictionaryTree)>) -> Option<String> {
    for name in ["constant/momentumTransport", "constant/turbulenceProperties", "constant/RASProperties"] {
        let Some((_, t)) = trees.get(name) else { continue };
        let body = &t.body;
        let sim = body.get_word("simulationType").unwrap_or("RAS");
        if sim == "laminar" {
            return None;
        }
        for section in [sim, "RAS", "LES"] {
            if let Some(d) = body.get_dict(section) {
                let on = d.get_word("turbulence").is_none_or(|v| v == "on" || v == "true" || v == "yes");
                if !on {
                    return None;
                }
                if let Some(m) = d.get_word("model").or_else(|| d.get_word("RASModel")).or_else(|| d.get_word("LESModel")) {
                    return Some(m.to_string());
                }
            }
        }
        if let Some(m) = body.get_word("RASModel") {
            return Some(m.to_string());
        }
    }
    None
}

#[derive(Debug, Clone)]
struct Patch {
    name: String,
    kind: Option<String>,
}

/// Patch names and types declared by the mesh description, with the file they came from.
fn boundary_set(trees: &BTreeMap<String, (&FoamFile, DictionaryTree)>) -> Option<(Vec<Patch>, String)> {
    if let Some((_, t)) = trees.get("constant/polyMesh/boundary") {
        let mut patches = Vec::new();
        for e in &t.body.entries {
            if let Entry::Bare(items) = e {
                for item in items {
                    if let Item::List(list) = item {
                        collect_named_dicts(list, &mut patches);
                    }
                }
            }
        }
        return Some((patches, "constant/polyMesh/boundary".into()));
    }
    let (_, t) = trees.get("system/blockMeshDict")?;
    let mut patches = Vec::new();
    if let Some([Item::List(list)]) = t.body.get_items("boundary") {
        collect_named_dicts(list, &mut patches);
    } else if let Some([Item::List(list)]) = t.body.get_items("patches") {
        // Legacy layout: `patches ( patch inlet ( ... ) wall walls ( ... ) );`
        let mut it = list.iter();
        while let (Some(kind), Some(name)) = (it.next(), it.next()) {
            it.next();
            if let (Some(k), Some(n)) = (kind.as_text(), name.as_text()) {
                patches.push(Patch { name: n.to_string(), kind: Some(k.to_string()) });
            }
        }
    } else {
        return None;
    }
    if let Some(dp) = t.body.get_dict("defaultPatch") {
        if let Some(n) = dp.get_word("name") {
            patches.push(Patch { name: n.to_string(), kind: dp.get_word("type").map(str::to_string) });
        }
    }
    Some((patches, "system/blockMeshDict".into()))
}

fn collect_named_dicts(list: &[Item], patches: &mut Vec<Patch>) {
    let mut i = 0;
    while i + 1 < list.len() {
        if let (Some(name), Item::Dict(d)) = (list[i].as_text(), &list[i + 1]) {
            patches.push(Patch { name: name.to_string(), kind: d.get_word("type").map(str::to_string) });
            i += 2;
        } else {
            i += 1;
        }
    }
}

/// Patch names contributed by snappyHexMesh surfaces, which the block mesh does not list.
fn snappy_patches(trees: &BTreeMap<String, (&FoamFile, DictionaryTree)>) -> Vec<String> {
    let Some((_, t)) = trees.get("system/snappyHexMeshDict") else { return Vec::new() };
    let mut names = Vec::new();
    let surfaces = t.body.get_dict("castellatedMeshControls").and_then(|c| c.get_dict("refinementSurfaces"));
    for d in [t.body.get_dict("geometry"), surfaces].into_iter().flatten() {
        for e in &d.entries {
            if let Entry::Dict { key, dict } = e {
                let base = dict.get_word("name").unwrap_or(key.split('.').next().unwrap_or(key));
                names.push(base.to_string());
                if let Some(regions) = dict.get_dict("regions") {
                    for r in &regions.entries {
                        if let Entry::Dict { key: rk, dict: rd } = r {
                            names.push(rd.get_word("name").unwrap_or(rk).to_string());
                        }
                    }
                }
            }
        }
    }
    names
}

enum PatchKey {
    Name(String),
    Pattern(Regex),
}

impl PatchKey {
    fn matches(&self, name: &str) -> bool {
        match self {
            PatchKey::Name(n) => n == name,
            PatchKey::Pattern(re) => re.is_match(name),
        }
    }
}

fn patch_key(key: &str) -> Option<PatchKey> {
    if let Some(inner) = key.strip_prefix('"').and_then(|k| k.strip_suffix('"')) {
        return Regex::new(&format!("^(?:{inner})$")).ok().map(PatchKey::Pattern);
    }
    if key.starts_with('$') {
        return None;
    }
    Some(PatchKey::Name(key.to_string()))
}

fn check_boundaries(
    trees: &BTreeMap<String, (&FoamFile, DictionaryTree)>,
    extra_boundaries: &[String],
    out: &mut Vec<Inconsistency>,
) {
    let (mut patches, source) = match boundary_set(trees) {
        Some(b) => b,
        None if !extra_boundaries.is_empty() => (Vec::new(), "mesh".to_string()),
        None => return,
    };
    for name in extra_boundaries {
        patches.push(Patch { name: name.clone(), kind: None });
    }
    let snappy = snappy_patches(trees);
    let known: BTreeSet<&str> = patches.iter().map(|p| p.name.as_str()).chain(snappy.iter().map(String::as_str)).collect();

    for (id, (file, tree)) in trees {
        if !is_field_folder(&file.folder_name) {
            continue;
        }
        let Some(bf) = tree.body.get_dict("boundaryField") else { continue };
        let mut keys = Vec::new();
        let mut opaque_include = false;
        let mut constraint_include = false;
        for e in &bf.entries {
            match e {
                Entry::Dict { key, .. } | Entry::Value { key, .. } => {
                    if let Some(k) = patch_key(key) {
                        keys.push((key.clone(), k));
                    }
                }
                Entry::Directive { name, args } => {
                    if args.contains("setConstraintTypes") {
                        constraint_include = true;
                    } else if name.starts_with("#include") {
                        opaque_include = true;
                    }
                }
                Entry::Bare(_) => {}
            }
        }

        for (raw, key) in &keys {
            if let PatchKey::Name(n) = key {
                if !known.contains(n.as_str()) {
                    push(
                        out,
                        InconsistencyKind::BoundaryPatchMismatch,
                        format!("patch '{n}' in {id} is not in the mesh boundary set"),
                        vec![id.clone(), source.clone()],
                    );
                }
            } else if !known.iter().any(|p| key.matches(p)) {
                push(
                    out,
                    InconsistencyKind::BoundaryPatchMismatch,
                    format!("pattern {raw} in {id} matches no mesh patch"),
                    vec![id.clone(), source.clone()],
                );
            }
        }

        if opaque_include {
            continue;
        }
        for p in &patches {
            let covered = keys.iter().any(|(_, k)| k.matches(&p.name));
            let exempt = constraint_include && p.kind.as_deref().is_some_and(|k| CONSTRAINT_TYPES.contains(&k));
            if !covered && !exempt {
                push(
                    out,
                    InconsistencyKind::BoundaryPatchMismatch,
                    format!("mesh patch '{}' has no boundary condition in {id}", p.name),
                    vec![id.clone(), source.clone()],
                );
            }
        }
    }
}
