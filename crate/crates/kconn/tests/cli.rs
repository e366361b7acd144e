//! Black-box tests of the `kconn` binary: exit codes, output formats, and
//! cross-process determinism.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_kconn");
const POINT_MASS: &str = r#"{"atoms": [{"x": 2, "q": 1.0, "p": 1.0}]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_with_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(BIN).args(args).env(key, value).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn moments_prints_point_mass_summary() {
    let dir = tempfile::tempdir().unwrap();
    let dist = dir.path().join("dist.json");
    write(&dist, POINT_MASS);
    let out = run(&["moments", "--dist", dist.to_str().unwrap(), "--n", "100", "--k", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["alpha"], 1.0);
    assert_eq!(v["kappa_star"], 2.0);
    assert_eq!(v["tau_star"], 2.0);
    assert_eq!(v["eta"]["2"], 4.0);
    assert_eq!(v["kappa_n"], 2.0);
    assert_eq!(v["tau_n"], 2.0);
}

#[test]
fn generate_then_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let dist = dir.path().join("dist.json");
    let graph = dir.path().join("graph.txt");
    write(&dist, POINT_MASS);
    let out = run(&[
        "generate",
        "--dist",
        dist.to_str().unwrap(),
        "--n",
        "50",
        "--m",
        "300",
        "--seed",
        "7",
        "--out",
        graph.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&graph).unwrap();
    assert!(text.starts_with("# n=50 m=300"), "header: {text:.20}");

    let out = run(&["--json", "check", "--graph", graph.to_str().unwrap(), "--k", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["vertex_connected_k"], true);
    assert_eq!(v["edge_connected_k"], true);

    // Same seed, fresh process: identical file bytes.
    let graph2 = dir.path().join("graph2.txt");
    let out = run(&[
        "generate",
        "--dist",
        dist.to_str().unwrap(),
        "--n",
        "50",
        "--m",
        "300",
        "--seed",
        "7",
        "--out",
        graph2.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(text, std::fs::read_to_string(&graph2).unwrap());
}

#[test]
fn check_exits_1_when_not_connected() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.txt");
    write(&graph, "# n=3 m=1\n1 2\n");
    let out = run(&["--json", "check", "--graph", graph.to_str().unwrap(), "--k", "1"]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["vertex_connected_k"], false);
    assert_eq!(v["edge_connected_k"], false);
}

#[test]
fn bad_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = run(&["check", "--graph", missing.to_str().unwrap(), "--k", "1"]);
    assert_eq!(code(&out), 2);

    let out = run(&["sweep", "--config", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let broken = dir.path().join("broken.json");
    write(&broken, "{ not json");
    let out = run(&["moments", "--dist", broken.to_str().unwrap(), "--n", "10", "--k", "2"]);
    assert_eq!(code(&out), 2);

    let out = run(&["no-such-command"]);
    assert_eq!(code(&out), 2);

    let out = run(&[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn help_and_version_exit_0() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    let out = run(&["--version"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn sweep_is_deterministic_across_processes_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    write(
        &config,
        r#"{
            "dist": {"atoms": [{"x": 2, "q": 1.0, "p": 1.0}]},
            "n": 200,
            "k": 2,
            "lambda_targets": [0.0, 2.0],
            "trials_per_point": 10,
            "seed": 99
        }"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = run(&["sweep", "--config", config.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_with_env(
        &["sweep", "--config", config.to_str().unwrap(), "--out", b.to_str().unwrap()],
        "KCONN_THREADS",
        "1",
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read_to_string(&a).unwrap();
    assert_eq!(first, std::fs::read_to_string(&b).unwrap());

    let mut lines = first.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("c_target,m_solved,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("2,"), "targets sorted downward: {}", rows[0]);
    assert!(rows[1].starts_with("0,"), "targets sorted downward: {}", rows[1]);

    // JSON mode carries the same rows plus the m/(n ln n) diagnostic.
    let out = run(&["--json", "sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let arr = v.as_array().expect("array of rows");
    assert_eq!(arr.len(), 2);
    assert!(arr[0]["m_solved"].is_u64());
    assert!(arr[0]["m_over_n_ln_n"].is_f64());
}

#[test]
fn sweep_refuses_distribution_without_edges() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    write(
        &config,
        r#"{
            "dist": {"atoms": [{"x": 1, "q": 1.0, "p": 1.0}]},
            "n": 100,
            "k": 2,
            "lambda_targets": [0.0],
            "trials_per_point": 5,
            "seed": 1
        }"#,
    );
    let out = run(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alpha"), "stderr: {err}");
}

#[cfg(unix)]
#[test]
fn closed_stdout_pipe_does_not_panic() {
    use std::process::Stdio;
    let dir = tempfile::tempdir().unwrap();
    let dist = dir.path().join("dist.json");
    write(&dist, POINT_MASS);
    // Enough edge-list output to overrun the pipe buffer, then hang up.
    let mut child = Command::new(BIN)
        .args(["generate", "--dist", dist.to_str().unwrap(), "--n", "1000", "--m", "50000", "--seed", "1"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdout.take());
    let out = child.wait_with_output().unwrap();
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!err.contains("panicked"), "stderr: {err}");
}

#[test]
fn verify_bounds_small_grid_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("verify.json");
    write(
        &config,
        r#"{
            "dist": {"atoms": [{"x": 2, "q": 1.0, "p": 1.0}]},
            "n": 50,
            "s_values": [0, 1],
            "r_values": [1, 2],
            "xq_pairs": [[2, 1.0], [5, 0.3]],
            "trials": 5000,
            "seed": 3
        }"#,
    );
    let out = run(&["--json", "verify-bounds", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["cells"].as_array().unwrap().len(), 8);
}
