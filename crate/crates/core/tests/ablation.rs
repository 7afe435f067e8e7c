use foamforge_core::ablation::{config_matrix, run_bench, to_csv, BenchRow, CaseOutcome, Toggle, DEFAULT_TOGGLES};
use foamforge_core::config::{Config, RetrievalMode};
use foamforge_core::scenario::{ScenarioKit, ScenarioSpec, Suite};

fn kit() -> ScenarioKit {
    ScenarioKit::new(Config::default().embedding_dim).unwrap()
}

fn outcome(name: &str, success: bool, token_usage: u64, loop_count: u32) -> CaseOutcome {
    CaseOutcome { name: name.into(), success, token_usage, loop_count }
}

fn row(cases: Vec<CaseOutcome>) -> BenchRow {
    BenchRow { reviewer: true, file_dependency: true, retrieval_mode: RetrievalMode::Hierarchy, cases }
}

#[test]
fn all_cases_succeeding_is_one_hundred_percent() {
    let r = row((0..4).map(|i| outcome(&format!("c{i}"), true, 100, 0)).collect());
    assert_eq!(r.success_rate(), 100.0);
    assert_eq!(r.avg_reviewer_loops(), 0.0);
}

#[test]
fn one_case_needing_two_loops_of_four_averages_half_a_loop() {
    let r = row(vec![outcome("a", true, 10, 2), outcome("b", true, 10, 0), outcome("c", true, 10, 0), outcome("d", true, 10, 0)]);
    assert_eq!(r.avg_reviewer_loops(), 0.5);
    let csv = to_csv(&[r]).unwrap();
    assert_eq!(
        csv,
        "reviewer,file_dependency,retrieval_mode,cases,success_rate,token_usage,avg_reviewer_loops\n\
         true,true,hierarchy,4,100.0,10.0,0.50\n"
    );
}

#[test]
fn reviewer_off_with_every_case_failing_is_zero() {
    let suite = Suite { cases: (1..=4).map(|k| ScenarioSpec::new(&format!("k{k}")).with_faults(k)).collect() };
    let base = Config { reviewer_enabled: false, ..Config::default() };
    let dir = tempfile::tempdir().unwrap();
    let rows = run_bench(&kit(), &suite, &[base], 2, dir.path()).unwrap();
    assert_eq!(rows[0].success_rate(), 0.0);
    assert_eq!(rows[0].avg_reviewer_loops(), 0.0);
    assert!(to_csv(&rows).unwrap().contains("false,true,hierarchy,4,0.0,"));
}

#[test]
fn default_matrix_on_repair_suite() {
    let kit = kit();
    let suite = Suite::repair();
    let configs = config_matrix(&Config::default(), &DEFAULT_TOGGLES);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_bench(&kit, &suite, &configs, 4, a.path()).unwrap();
    let second = run_bench(&kit, &suite, &configs, 1, b.path()).unwrap();
    let csv = to_csv(&first).unwrap();
    assert_eq!(csv, to_csv(&second).unwrap(), "CSV differs between runs");
    assert_eq!(csv.lines().count(), 5, "{csv}");

    for r in &first {
        assert_eq!(r.cases.len(), suite.cases.len());
        let names: Vec<&str> = r.cases.iter().map(|c| c.name.as_str()).collect();
        let expected: Vec<&str> = suite.cases.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, expected);
    }
    let on = first.iter().find(|r| r.reviewer && r.file_dependency).unwrap();
    let off = first.iter().find(|r| !r.reviewer && r.file_dependency).unwrap();
    // Seven of eight repair cases are fixable; without the reviewer only the two clean ones pass.
    assert_eq!(on.success_rate(), 87.5);
    assert_eq!(off.success_rate(), 25.0);
    assert!(off.success_rate() < on.success_rate());
    assert!(on.avg_reviewer_loops() > 0.0);
}

#[test]
fn full_matrix_has_eight_rows() {
    let suite = Suite { cases: vec![ScenarioSpec::new("clean"), ScenarioSpec::new("one").with_faults(1)] };
    let configs = config_matrix(&Config::default(), &[Toggle::Reviewer, Toggle::FileDependency, Toggle::RetrievalMode]);
    let dir = tempfile::tempdir().unwrap();
    let rows = run_bench(&kit(), &suite, &configs, 3, dir.path()).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().any(|r| r.retrieval_mode == RetrievalMode::SingleIndex));
}
