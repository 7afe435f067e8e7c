use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn foamforge(cwd: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_foamforge"));
    cmd.current_dir(cwd)
        .env_remove("FOAMFORGE_SETTINGS")
        .env_remove("FOAMFORGE_WORKDIR")
        .env_remove("FOAMFORGE_INDEX")
        .env_remove("FOAMFORGE_REAL_EXEC");
    cmd
}

fn run(cwd: &Path, args: &[&str]) -> Output {
    foamforge(cwd).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn corpus_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/corpus")
}

#[test]
fn scenario_run_succeeds_and_reports_status_loops_and_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["run", "--scenario", "two-faults"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("status    success"), "{out}");
    assert!(out.contains("loops     2"), "{out}");
    assert!(out.contains("tokens    "), "{out}");
    assert!(dir.path().join("runs/two-faults/state.json").is_file());
    assert!(dir.path().join("runs/two-faults/case/system/controlDict").is_file());
}

#[test]
fn json_summary_is_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--workdir", "out", "run", "--scenario", "clean-plot", "--case-id", "demo", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["run_status"], "success");
    assert_eq!(v["loop_count"], 0);
    assert!(v["token_usage"].as_u64().unwrap() > 0);
    assert_eq!(v["images"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("out/demo/trace.ndjson").is_file());
}

#[test]
fn simulation_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["run", "--scenario", "stubborn", "--max-loops", "2"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stdout(&o).contains("status    failure"));
    assert!(stdout(&o).contains("loops     2"));
}

#[test]
fn usage_and_configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["run", "--no-such-flag"],
        &["run", "--scenario", "no-such-scenario"],
        &["--max-loops", "0", "run", "--scenario", "clean"],
        &["--temperature", "3", "run", "--scenario", "clean"],
        &["--retrieval-mode", "fuzzy", "run", "--scenario", "clean"],
        &["run", "--prompt", "a cavity flow"],
        &["run"],
        &["--settings", "missing.toml", "run", "--scenario", "clean"],
        &["bench", "--toggles", "reviewer,colour"],
        &["bench", "--jobs", "0"],
        &["bench", "missing-suite.json"],
        &["index", "build", "no-such-dir", "-o", "idx"],
        &["index", "info", "no-such-index"],
    ];
    for args in cases {
        let o = run(dir.path(), args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty(), "{args:?} printed no diagnostic");
    }
}

#[test]
fn local_execution_requires_the_real_exec_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["run", "--scenario", "clean", "--executor", "local"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("FOAMFORGE_REAL_EXEC"), "{}", stderr(&o));
}

#[test]
fn settings_file_provides_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("foamforge.toml"), "[workflow]\nmax_loops = 1\n\n[paths]\nworkdir = \"from-settings\"\n").unwrap();

    let o = run(dir.path(), &["run", "--scenario", "stubborn", "--json"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["loop_count"], 1);
    assert!(dir.path().join("from-settings/stubborn/state.json").is_file());

    let o = run(dir.path(), &["--max-loops", "3", "--workdir", "flagged", "run", "--scenario", "stubborn", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["loop_count"], 3);
    assert!(dir.path().join("flagged/stubborn/state.json").is_file());

    // The same file named explicitly, from another directory.
    let elsewhere = tempfile::tempdir().unwrap();
    let settings = dir.path().join("foamforge.toml");
    let o = run(elsewhere.path(), &["--settings", settings.to_str().unwrap(), "run", "--scenario", "stubborn", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["loop_count"], 1);

    std::fs::write(dir.path().join("foamforge.toml"), "[workflow]\nmax_loop = 1\n").unwrap();
    let o = run(dir.path(), &["run", "--scenario", "clean"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("malformed settings file"), "{}", stderr(&o));
}

#[test]
fn reviewer_flag_disables_repair() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--reviewer-enabled", "false", "run", "--scenario", "one-fault", "--json"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["loop_count"], 0);
}

#[test]
fn index_build_writes_a_loadable_index() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus_root();
    let o = run(dir.path(), &["--embedding-dim", "64", "index", "build", root.to_str().unwrap(), "-o", "idx"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("indexed "), "{}", stdout(&o));
    for f in ["manifest.json", "embedder.json"] {
        assert!(dir.path().join("idx").join(f).is_file(), "{f}");
    }
    let o = run(dir.path(), &["index", "info", "idx"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("dim 64") && out.contains("embedder hash"), "{out}");
}

#[test]
fn bench_csv_is_identical_across_job_counts_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let serial = run(dir.path(), &["--workdir", "a", "bench", "--jobs", "1"]);
    assert_eq!(code(&serial), 0, "{}", stderr(&serial));
    let parallel = run(dir.path(), &["--workdir", "b", "bench", "--jobs", "4", "--out", "table.csv"]);
    assert_eq!(code(&parallel), 0, "{}", stderr(&parallel));
    let written = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(stdout(&serial), written);
    assert_eq!(written.lines().count(), 5);
    assert!(written.starts_with("reviewer,file_dependency,retrieval_mode,cases,success_rate,token_usage,avg_reviewer_loops\n"));
}

#[test]
fn bench_reads_toml_and_json_suites() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("suite.toml"),
        "[[cases]]\nname = \"a\"\n\n[[cases]]\nname = \"b\"\nfaults = 1\n",
    )
    .unwrap();
    let o = run(dir.path(), &["bench", "suite.toml", "--toggles", "reviewer"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("true,true,hierarchy,2,100.0,"), "{}", lines[1]);
    assert!(lines[2].starts_with("false,true,hierarchy,2,50.0,"), "{}", lines[2]);

    std::fs::write(dir.path().join("suite.json"), r#"{"cases":[{"name":"x","faults":9}]}"#).unwrap();
    let o = run(dir.path(), &["bench", "suite.json"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn serve_answers_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = foamforge(dir.path())
        .args(["serve", "--scenario", "clean", "--listen", "127.0.0.1:0"])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut banner).unwrap();
    let addr = banner.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("banner: {banner}")).to_string();

    let stream = TcpStream::connect(&addr).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    writeln!(writer, r#"{{"jsonrpc":"2.0","id":1,"method":"tools/list"}}"#).unwrap();
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    let v: Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["result"]["tools"].as_array().unwrap().len(), 11);
}

#[test]
fn serve_over_stdio_ends_cleanly_at_end_of_input() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = foamforge(dir.path())
        .args(["serve", "--scenario", "clean"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"{\"jsonrpc\":\"2.0\",\"id\":7,\"method\":\"ping\"}\n{\"jsonrpc\":\"2.0\",\"method\":\"notifications/initialized\"}\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "{\"id\":7,\"jsonrpc\":\"2.0\",\"result\":{}}\n");
}
