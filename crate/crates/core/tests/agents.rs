use std::path::{Path, PathBuf};

use foamforge_core::agents::{
    apply_modifications, architect_plan, generate_allrun, generate_hpc_script, guard_pinned_values, prepare_mesh,
    review, run_simulation, select_mesh_mode, visualize, write_inputs, AgentContext, AgentError, HpcConfig, MeshMode,
    VisualizationRequest, VISUALIZATION_SCRIPT,
};
use foamforge_core::case::{CaseDescriptor, CaseState, FoamFile, PlannedFile, RunStatus, SimulationPlan, VocabularySets};
use foamforge_core::config::Config;
use foamforge_core::exec::{FakeExecutor, FakeStep};
use foamforge_core::foam::parse;
use foamforge_core::index::{build_index_set, ingest_corpus, IndexSet, Stage};
use foamforge_core::llm::{HashEmbedder, ScriptedProvider};
use foamforge_core::prompts::PromptLibrary;

const DIM: usize = 1536;
const CAVITY: &str = "incompressible/icoFoam/cavity";
const CAVITY_PROMPT: &str = "do a lid-driven cavity flow simulation with the top wall moving at 1 m/s, using icoFoam, endTime 0.5";

struct World {
    indices: IndexSet,
    prompts: PromptLibrary,
    vocab: VocabularySets,
    config: Config,
}

impl World {
    fn new() -> Self {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
        let records = ingest_corpus(&root).unwrap();
        World {
            indices: build_index_set(&records, &HashEmbedder::new(DIM), DIM).unwrap(),
            prompts: PromptLibrary::bundled(),
            vocab: VocabularySets::bundled(),
            config: Config::default(),
        }
    }

    fn cx<'a>(&'a self, provider: &'a ScriptedProvider) -> AgentContext<'a> {
        AgentContext::new(provider, &self.indices, &self.prompts, &self.vocab, &self.config)
    }
}

fn cavity_descriptor() -> CaseDescriptor {
    CaseDescriptor {
        case_name: "cavity".into(),
        case_domain: "incompressible".into(),
        case_category: "None".into(),
        case_solver: "icoFoam".into(),
    }
}

const CLASSIFICATION: &str =
    r#"{"case_name":"cavity","case_domain":"incompressible","case_category":"None","case_solver":"icoFoam"}"#;

fn nine_subtasks() -> String {
    let files = [
        ("0", "U"),
        ("0", "p"),
        ("constant", "transportProperties"),
        ("constant", "physicalProperties"),
        ("system", "controlDict"),
        ("system", "fvSchemes"),
        ("system", "fvSolution"),
        ("system", "blockMeshDict"),
        ("system", "decomposeParDict"),
    ];
    let items: Vec<String> =
        files.iter().map(|(d, f)| format!(r#"{{"file_name":"{f}","folder_name":"{d}"}}"#)).collect();
    format!(r#"{{"subtasks":[{}]}}"#, items.join(","))
}

#[test]
fn architect_plans_the_cavity_case() {
    let w = World::new();
    let p = ScriptedProvider::new([CLASSIFICATION.to_string(), nine_subtasks()]);
    let cx = w.cx(&p);
    let mut state = CaseState::new("c1", CAVITY_PROMPT);
    let (descriptor, plan) = architect_plan(&cx, &mut state).unwrap();

    assert_eq!(descriptor, cavity_descriptor());
    assert_eq!(plan.files.len(), 9);
    for f in &plan.files {
        assert!(["0", "constant", "system"].contains(&f.folder_name.as_str()), "{}", f.id());
    }
    assert_eq!(plan.source_reference, CAVITY);
    assert_eq!(state.plan, plan);
    assert!(state.tutorial_reference.contains("<file path=\"system/controlDict\">"));
    assert!(state.allrun_reference.contains("runApplication icoFoam"));

    let architect_calls = cx.retrievals().iter().filter(|r| r.stage == Some(Stage::Architect)).count();
    assert_eq!(architect_calls, 1);

    let reqs = p.requests();
    let ids: Vec<&str> = reqs.iter().map(|r| r.template_id.as_str()).collect();
    assert_eq!(ids, ["case_description", "task_decomposition"]);
    assert!(reqs[1].system_prompt.contains("You are an experienced Planner specializing in OpenFOAM projects."));
    // The retrieved directory structure is part of the planning context.
    assert!(reqs[1].user_prompt.contains("cavity/\n  0/\n    U\n    p\n"), "{}", reqs[1].user_prompt);
    assert!(state.prompt_tokens > 0 && state.completion_tokens > 0);
}

#[test]
fn empty_subtask_list_is_an_empty_plan() {
    let w = World::new();
    let p = ScriptedProvider::new([CLASSIFICATION, r#"{"subtasks":[]}"#]);
    let mut state = CaseState::new("c1", CAVITY_PROMPT);
    assert!(matches!(architect_plan(&w.cx(&p), &mut state), Err(AgentError::EmptyPlan)));
}

#[test]
fn classification_outside_the_vocabulary_is_rejected() {
    let w = World::new();
    let p = ScriptedProvider::new([CLASSIFICATION.replace("icoFoam", "madeUpFoam")]);
    let mut state = CaseState::new("c1", CAVITY_PROMPT);
    assert!(matches!(architect_plan(&w.cx(&p), &mut state), Err(AgentError::Case(_))));
}

fn three_file_state() -> CaseState {
    let mut state = CaseState::new("c1", CAVITY_PROMPT);
    state.descriptor = Some(cavity_descriptor());
    state.plan = SimulationPlan {
        files: vec![
            PlannedFile::new("system", "controlDict"),
            PlannedFile::new("constant", "transportProperties"),
            PlannedFile::new("0", "U").with_deps(&["constant/transportProperties"]),
        ],
        source_reference: CAVITY.into(),
    };
    state
}

const ALLRUN_TEXT: &str = "```\n#!/bin/sh\ncd ${0%/*} || exit 1\n. $WM_PROJECT_DIR/bin/tools/RunFunctions\nrunApplication blockMesh\nrunApplication icoFoam\n```";

fn write_responses() -> Vec<String> {
    vec![
        "```\nmarkerOne 1;\n```".into(),
        "markerTwo 2;".into(),
        "markerThree 3;".into(),
        r#"["blockMesh", "icoFoam"]"#.into(),
        ALLRUN_TEXT.into(),
    ]
}

#[test]
fn dependency_mode_embeds_exactly_the_earlier_files_in_order() {
    let w = World::new();
    let p = ScriptedProvider::new(write_responses());
    let mut state = three_file_state();
    let files = write_inputs(&w.cx(&p), &mut state).unwrap();

    let ids: Vec<String> = files.iter().map(FoamFile::id).collect();
    assert_eq!(ids.last().map(String::as_str), Some("Allrun"));
    assert_eq!(files[0].content, "markerOne 1;\n");
    assert_eq!(state.foamfiles.len(), 4);

    let reqs = p.requests();
    let gens: Vec<_> = reqs.iter().filter(|r| r.template_id == "file_generation").collect();
    assert_eq!(gens.len(), 3);
    let anchor = "The following are files content already generated";
    assert!(!gens[0].user_prompt.contains(anchor));
    assert!(gens[1].user_prompt.contains(anchor));
    assert!(gens[1].user_prompt.contains("markerOne 1;") && !gens[1].user_prompt.contains("markerTwo"));
    let third = &gens[2].user_prompt;
    let (a, b) = (third.find("markerOne 1;").unwrap(), third.find("markerTwo 2;").unwrap());
    assert!(a < b, "prior files out of order");
    assert!(!third.contains("markerThree"));
    assert_eq!(
        reqs.iter().map(|r| r.template_id.as_str()).collect::<Vec<_>>(),
        ["file_generation", "file_generation", "file_generation", "command_generation", "allrun_generation"]
    );
}

#[test]
fn dependency_mode_off_sends_no_prior_files() {
    let mut w = World::new();
    w.config.file_dependency_enabled = false;
    let p = ScriptedProvider::new(write_responses());
    let mut state = three_file_state();
    write_inputs(&w.cx(&p), &mut state).unwrap();
    for r in p.requests().iter().filter(|r| r.template_id == "file_generation") {
        assert!(!r.user_prompt.contains("files content already generated"));
        assert!(!r.user_prompt.contains("markerOne"));
    }
}

#[test]
fn unparseable_generated_file_is_a_lint_finding_not_an_abort() {
    let w = World::new();
    let mut responses = write_responses();
    responses[0] = "application icoFoam;\nbroken {".into();
    let p = ScriptedProvider::new(responses);
    let mut state = three_file_state();
    write_inputs(&w.cx(&p), &mut state).unwrap();
    assert_eq!(state.lint.parse_errors.len(), 1);
    assert_eq!(state.lint.parse_errors[0].file, "system/controlDict");
}

fn golden(name: &str, actual: &str) {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/agents").join(name);
    if std::env::var_os("FOAMFORGE_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden {name} differs");
}

#[test]
fn external_msh_allrun_converts_before_the_solver() {
    let w = World::new();
    let dir = tempfile::tempdir().unwrap();
    let msh = dir.path().join("box.msh");
    std::fs::write(&msh, "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n").unwrap();

    let spec = select_mesh_mode(CAVITY_PROMPT, &[msh.display().to_string()]);
    assert_eq!(spec.mode, MeshMode::ExternalMsh);

    let p = ScriptedProvider::new([r#"["blockMesh", "icoFoam"]"#, ALLRUN_TEXT]);
    let cx = w.cx(&p);
    let mut state = three_file_state();
    state.plan.files.push(PlannedFile::new("system", "blockMeshDict"));
    let mesh = prepare_mesh(&cx, &mut state, &spec).unwrap();
    assert_eq!(mesh.commands, ["gmshToFoam box.msh"]);
    assert!(!state.plan.contains("system", "blockMeshDict"));
    assert!(state.file("", "box.msh").is_some());

    let allrun = generate_allrun(&cx, &mut state).unwrap();
    let lines: Vec<&str> = allrun.content.lines().collect();
    let convert = lines.iter().position(|l| l.contains("gmshToFoam box.msh")).expect("conversion line");
    let solver = lines.iter().position(|l| l.contains("icoFoam")).unwrap();
    assert!(convert < solver);
    assert!(!lines.iter().any(|l| l.contains("blockMesh")));
    golden("external_msh.Allrun", &allrun.content);
}

#[test]
fn native_mode_plans_a_block_mesh_dict() {
    let w = World::new();
    let p = ScriptedProvider::new(Vec::<String>::new());
    let spec = select_mesh_mode("cavity flow", &[]);
    assert_eq!(spec.mode, MeshMode::Native);
    let mut state = three_file_state();
    let mesh = prepare_mesh(&w.cx(&p), &mut state, &spec).unwrap();
    assert!(state.plan.contains("system", "blockMeshDict"));
    assert_eq!(mesh.commands, ["blockMesh"]);
    assert!(p.requests().is_empty());
}

#[test]
fn gmsh_mode_emits_a_script_the_allrun_runs() {
    let w = World::new();
    let req = "Flow around a cylinder. Use gmsh to create the computational mesh.";
    let spec = select_mesh_mode(req, &[]);
    assert_eq!(spec.mode, MeshMode::GmshScript);
    let p = ScriptedProvider::new([
        "```python\nimport gmsh\ngmsh.initialize()\ngmsh.write('mesh.msh')\n```",
        r#"["icoFoam"]"#,
        "#!/bin/sh\nicoFoam > log.icoFoam 2>&1\n",
    ]);
    let cx = w.cx(&p);
    let mut state = three_file_state();
    state.user_requirement = req.into();
    prepare_mesh(&cx, &mut state, &spec).unwrap();
    let script = state.file("", "mesh.py").expect("mesh script artifact");
    assert!(script.content.contains("gmsh.initialize()"));
    let allrun = generate_allrun(&cx, &mut state).unwrap();
    assert_eq!(
        allrun.content,
        "#!/bin/sh\npython3 mesh.py > log.python3 2>&1\ngmshToFoam mesh.msh > log.gmshToFoam 2>&1\nicoFoam > log.icoFoam 2>&1\n"
    );
}

const CONTROL: &str = "FoamFile\n{\n    version 2.0;\n    format ascii;\n    class dictionary;\n    object controlDict;\n}\napplication icoFoam;\nendTime 0.5;\ndeltaT 0.005;\n";
const FATAL_LOG: &str = "Create time\n\n--> FOAM FATAL ERROR:\nUnknown patch movingWal\n\n    From function X\n    in file Y at line 1.\n\nFOAM exiting\n";

fn generated_state() -> CaseState {
    let mut state = three_file_state();
    state.foamfiles = vec![
        FoamFile::new("system", "controlDict", CONTROL),
        FoamFile::new("constant", "transportProperties", "nu [0 2 -1 0 0 0 0] 0.01;\n"),
        FoamFile::new("", "Allrun", "#!/bin/sh\nblockMesh\nicoFoam\n"),
    ];
    state
}

fn correction(files: &[(&str, &str, &str)]) -> String {
    serde_json::to_string(
        &files
            .iter()
            .map(|(d, f, c)| serde_json::json!({"file_name": f, "folder_name": d, "content": c}))
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

#[test]
fn second_review_embeds_the_history_of_the_first() {
    let w = World::new();
    let fixed = CONTROL.replace("deltaT 0.005", "deltaT 0.001");
    let p = ScriptedProvider::new([
        "First analysis: the patch name is misspelt.".to_string(),
        correction(&[("constant", "transportProperties", "nu [0 2 -1 0 0 0 0] 0.02;\n")]),
        "Second analysis: lower the time step.".to_string(),
        correction(&[("system", "controlDict", &fixed)]),
    ]);
    let cx = w.cx(&p);
    let ex = FakeExecutor::always_failing(2, "log.icoFoam", FATAL_LOG);
    let work = tempfile::tempdir().unwrap();
    let mut state = generated_state();

    run_simulation(&mut state, &ex, work.path()).unwrap();
    assert_eq!((state.run_status, state.history.len()), (RunStatus::Failure, 1));
    let first = review(&cx, &mut state).unwrap();
    assert_eq!(state.history[0].review_analysis, first.analysis_text);
    state = apply_modifications(&state, &first.proposed_modifications);

    run_simulation(&mut state, &ex, work.path()).unwrap();
    assert_eq!(state.history.len(), 2);
    let second = review(&cx, &mut state).unwrap();

    let reqs = p.requests();
    assert_eq!(reqs[0].template_id, "error_analysis_initial");
    assert!(!reqs[0].user_prompt.contains("<history>"));
    assert_eq!(reqs[2].template_id, "error_analysis_subsequent");
    let user = &reqs[2].user_prompt;
    assert!(user.contains("<history>\n<Attempt 1>"), "{user}");
    assert!(user.contains("First analysis: the patch name is misspelt."));
    assert!(!user.contains("<Attempt 2>"));
    assert!(user.contains("I have modified the files according to your previous suggestions."));
    assert!(user.contains("Unknown patch movingWal"));
    assert_eq!(reqs[3].template_id, "file_correction");
    assert!(reqs[2].system_prompt.contains("You are an expert in OpenFOAM simulation and numerical modeling."));

    assert_eq!(second.proposed_modifications, vec![FoamFile::new("system", "controlDict", fixed)]);
    assert!(second.reverted.is_empty());
}

#[test]
fn review_context_carries_current_lint_findings() {
    let w = World::new();
    let fixed = CONTROL.replace("deltaT 0.005", "deltaT 0.001");
    let p = ScriptedProvider::new(["analysis".to_string(), correction(&[("system", "controlDict", &fixed)])]);
    let ex = FakeExecutor::always_failing(1, "log.icoFoam", FATAL_LOG);
    let work = tempfile::tempdir().unwrap();
    let mut state = generated_state();
    state.foamfiles.push(FoamFile::new("system", "fvSchemes", "ddtSchemes {"));
    foamforge_core::agents::relint(&mut state);
    run_simulation(&mut state, &ex, work.path()).unwrap();
    review(&w.cx(&p), &mut state).unwrap();
    let reqs = p.requests();
    for r in &reqs {
        assert!(r.user_prompt.contains("Static consistency check findings:\n[parse_error] system/fvSchemes"), "{}", r.template_id);
    }
}

#[test]
fn correction_keeps_only_changed_files() {
    let w = World::new();
    let fixed = CONTROL.replace("deltaT 0.005", "deltaT 0.001");
    let p = ScriptedProvider::new([
        "analysis".to_string(),
        correction(&[
            ("system", "controlDict", &fixed),
            ("constant", "transportProperties", "nu [0 2 -1 0 0 0 0] 0.01;\n"),
        ]),
    ]);
    let ex = FakeExecutor::always_failing(1, "log.icoFoam", FATAL_LOG);
    let work = tempfile::tempdir().unwrap();
    let mut state = generated_state();
    run_simulation(&mut state, &ex, work.path()).unwrap();
    let r = review(&w.cx(&p), &mut state).unwrap();
    assert_eq!(r.proposed_modifications.len(), 1);
    assert_eq!(r.proposed_modifications[0].id(), "system/controlDict");
}

#[test]
fn empty_correction_is_an_error() {
    let w = World::new();
    let p = ScriptedProvider::new(["analysis", "[]"]);
    let ex = FakeExecutor::always_failing(1, "log.icoFoam", FATAL_LOG);
    let work = tempfile::tempdir().unwrap();
    let mut state = generated_state();
    run_simulation(&mut state, &ex, work.path()).unwrap();
    assert!(matches!(review(&w.cx(&p), &mut state), Err(AgentError::EmptyCorrection)));
}

#[test]
fn review_of_a_successful_run_is_a_precondition_error() {
    let w = World::new();
    let p = ScriptedProvider::new(["unused"]);
    let ex = FakeExecutor::new(vec![FakeStep::success()]);
    let work = tempfile::tempdir().unwrap();
    let mut state = generated_state();
    run_simulation(&mut state, &ex, work.path()).unwrap();
    assert_eq!(state.run_status, RunStatus::Success);
    assert!(state.history.is_empty());
    assert!(matches!(review(&w.cx(&p), &mut state), Err(AgentError::Precondition(_))));
    assert!(p.requests().is_empty());
}

#[test]
fn guard_restores_values_the_requirement_pins() {
    let current = vec![FoamFile::new("system", "controlDict", CONTROL)];
    let mut mods = vec![FoamFile::new(
        "system",
        "controlDict",
        CONTROL.replace("endTime 0.5", "endTime 2").replace("deltaT 0.005", "deltaT 0.001"),
    )];
    let reverted = guard_pinned_values(CAVITY_PROMPT, &current, &mut mods);
    assert_eq!(reverted, ["system/controlDict:endTime"]);
    let tree = parse(&mods[0].content, Some("controlDict")).unwrap();
    assert_eq!(tree.body.get_word("endTime"), Some("0.5"));
    assert_eq!(tree.body.get_word("deltaT"), Some("0.001"));
}

#[test]
fn apply_modifications_replaces_adds_and_is_idempotent() {
    let state = generated_state();
    let replaced = apply_modifications(&state, &[FoamFile::new("system", "controlDict", "new")]);
    assert_eq!(replaced.foamfiles.len(), state.foamfiles.len());
    assert_eq!(replaced.file("system", "controlDict").unwrap().content, "new");
    assert_eq!(replaced.file("", "Allrun"), state.file("", "Allrun"));

    let k = [FoamFile::new("0", "k", "k")];
    let added = apply_modifications(&state, &k);
    assert_eq!(added.foamfiles.len(), state.foamfiles.len() + 1);
    assert_eq!(apply_modifications(&added, &k), added);
    assert_eq!(apply_modifications(&state, &[]), state);
}

fn appendix_hpc_config() -> HpcConfig {
    HpcConfig {
        cluster_name: "perlmutter".into(),
        account: "xxxx".into(),
        tasks: Some(32),
        ..HpcConfig::default()
    }
}

#[test]
fn hpc_script_has_the_required_directives() {
    let mut state = generated_state();
    let script = generate_hpc_script(&mut state, &appendix_hpc_config(), "/scratch/run/cavity").unwrap();
    let lines: Vec<&str> = script.lines().collect();
    for needed in [
        "#!/bin/bash",
        "#SBATCH -A xxxx",
        "#SBATCH -N 1",
        "#SBATCH -n 32",
        "#SBATCH --ntasks-per-node=32",
        "#SBATCH -t 02:00:00",
        "cd /scratch/run/cavity || exit 1",
        "if ./Allrun -parallel; then",
        "    exit 1",
    ] {
        assert!(lines.contains(&needed), "missing `{needed}` in\n{script}");
    }
    assert_eq!(state.hpc_script.as_deref(), Some(script.as_str()));

    let dict = state.file("system", "decomposeParDict").expect("decomposition dictionary");
    let tree = parse(&dict.content, Some("decomposeParDict")).unwrap();
    assert_eq!(tree.body.get_word("numberOfSubdomains"), Some("32"));
    assert_eq!(tree.body.get_word("method"), Some("scotch"));
}

#[test]
fn hpc_without_account_is_rejected() {
    let mut state = generated_state();
    let cfg = HpcConfig { account: String::new(), ..appendix_hpc_config() };
    assert!(matches!(generate_hpc_script(&mut state, &cfg, "."), Err(AgentError::MissingAccount)));
}

#[test]
fn hpc_rewrites_a_mismatched_geometric_decomposition() {
    let mut state = generated_state();
    state.foamfiles.push(FoamFile::new(
        "system",
        "decomposeParDict",
        "numberOfSubdomains 4;\nmethod simple;\nsimpleCoeffs\n{\n    n (2 2 1);\n}\n",
    ));
    generate_hpc_script(&mut state, &appendix_hpc_config(), ".").unwrap();
    let tree = parse(&state.file("system", "decomposeParDict").unwrap().content, None).unwrap();
    assert_eq!(tree.body.get_word("numberOfSubdomains"), Some("32"));
    assert_eq!(tree.body.get_word("method"), Some("scotch"));
}

fn succeeded_state(dir: &Path) -> CaseState {
    let mut state = generated_state();
    state.run_status = RunStatus::Success;
    std::fs::create_dir_all(dir).unwrap();
    state
}

#[test]
fn visualization_retries_with_the_previous_error() {
    let w = World::new();
    let p = ScriptedProvider::new(["```python\nimport pyvista\nbroken(\n```", "import pyvista\nprint('ok')\n"]);
    let ex = FakeExecutor::new(vec![
        FakeStep::failure("log.python3", "Traceback (most recent call last):\nSyntaxError: unexpected EOF\n"),
        FakeStep::success().writing("U.png", b"\x89PNG".to_vec()),
    ]);
    let dir = tempfile::tempdir().unwrap();
    let mut state = succeeded_state(dir.path());
    let images = visualize(&w.cx(&p), &mut state, &ex, dir.path(), &VisualizationRequest::new("U")).unwrap();
    assert_eq!(images, ["U.png"]);
    assert_eq!(state.visualization_artifacts, ["U.png"]);
    assert_eq!(ex.invocations(), [format!("run_script:{VISUALIZATION_SCRIPT}"), format!("run_script:{VISUALIZATION_SCRIPT}")]);

    let reqs = p.requests();
    assert_eq!(reqs.len(), 2);
    assert!(!reqs[0].user_prompt.contains("previous script failed"));
    assert!(reqs[1].user_prompt.contains("SyntaxError: unexpected EOF"));
    assert!(reqs[1].user_prompt.contains("<previous_script>import pyvista\nbroken(\n</previous_script>"));
    assert!(reqs[0].system_prompt.contains("pyvista"));
    let written = std::fs::read_to_string(dir.path().join(VISUALIZATION_SCRIPT)).unwrap();
    assert_eq!(written, "import pyvista\nprint('ok')\n");
}

#[test]
fn visualization_gives_up_after_the_bound() {
    let w = World::new();
    let p = ScriptedProvider::new(["a", "b", "c", "d"]);
    let ex = FakeExecutor::always_failing(5, "log.python3", "ImportError: no module named pyvista\n");
    let dir = tempfile::tempdir().unwrap();
    let mut state = succeeded_state(dir.path());
    let err = visualize(&w.cx(&p), &mut state, &ex, dir.path(), &VisualizationRequest::new("p")).unwrap_err();
    assert!(matches!(err, AgentError::VisualizationExhausted { attempts: 3 }), "{err:?}");
    assert_eq!(p.requests().len(), 3);
}

#[test]
fn script_success_without_the_image_is_not_success() {
    let w = World::new();
    let p = ScriptedProvider::new(["a", "b", "c"]);
    let ex = FakeExecutor::new(vec![FakeStep::success(), FakeStep::success(), FakeStep::success()]);
    let dir = tempfile::tempdir().unwrap();
    let mut state = succeeded_state(dir.path());
    let err = visualize(&w.cx(&p), &mut state, &ex, dir.path(), &VisualizationRequest::new("p")).unwrap_err();
    assert!(matches!(err, AgentError::VisualizationExhausted { attempts: 3 }));
    assert!(p.requests()[1].user_prompt.contains("p.png was not written"));
}
