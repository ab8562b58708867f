use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coalesce-flow"));
    c.env_remove("COALESCE_FLOW_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_skeleton_and_echoes_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sk");
    let o = run(&[
        "simulate", "--flow", "tanaka", "--dt", "1e-3", "--window", "0:1", "--starts", "net:0.05", "--seed", "7",
        "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["skeleton.json", "paths.csv", "merges.csv", "metadata.json", "driving.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let m = json(&out.join("metadata.json"));
    assert_eq!(m["command"], "simulate");
    let c = &m["config"];
    assert_eq!(c["dt"], 1e-3);
    assert_eq!(c["window"], serde_json::json!([0.0, 1.0]));
    assert_eq!(c["seed"], 7);
    assert_eq!(c["starts"]["spacing"], 0.05);
    assert_eq!(c["starts"]["time_spacing"], 0.05);
    assert_eq!(c["horizon"], 1.5);
    assert!(c["flow"]["kind"].to_string().contains("tanaka"), "{}", c["flow"]);
    assert!(c["snap_tol"].is_number() && c["eps_floor"].is_number());
}

#[test]
fn missing_graph_is_a_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sk");
    let o = run(&[
        "simulate", "--flow", "walsh", "--graph", s(&dir.path().join("nope.json")), "--out", s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0, "staging left behind");

    // star flows need a graph at all
    assert_eq!(code(&run(&["simulate", "--flow", "walsh", "--out", s(&out)])), 2);
    assert_eq!(code(&run(&["simulate", "--flow", "skew", "--out", s(&out)])), 2);
    assert_eq!(code(&run(&["simulate", "--flow", "bogus"])), 2);
    assert!(!out.exists());
}

#[test]
fn existing_output_is_not_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("keep"), "x").unwrap();
    let o = run(&["simulate", "--flow", "coalescing-bm", "--window", "0:0.1", "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert_eq!(std::fs::read_to_string(dir.path().join("keep")).unwrap(), "x");
}

fn simulate(dir: &Path, name: &str, flow: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["simulate"];
    args.extend_from_slice(flow);
    args.extend_from_slice(&["--dt", "1e-4", "--window", "0:0.5", "--starts", "net:0.08:0.6:0.02", "--seed", "3"]);
    args.extend_from_slice(&["--out", s(&out)]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn verify(sk: &Path, extra: &[&str]) -> (i32, Value) {
    let report = sk.with_extension("verify.json");
    let mut args = vec!["verify", "--skeleton", s(sk), "--samples", "500", "--out", s(&report)];
    args.extend_from_slice(extra);
    let o = run(&args);
    (code(&o), json(&report))
}

#[test]
fn coalescing_bm_skeleton_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let sk = simulate(dir.path(), "bm", &["--flow", "coalescing-bm"]);
    let (c, r) = verify(&sk, &[]);
    assert_eq!(c, 0, "{r}");
    assert_eq!(r["strong_flow"]["max_residual"], 0.0);
    assert_eq!(r["strong_flow"]["evaluated"], 500);
    assert_eq!(r["pass"], true);
    assert_eq!(r["config"]["eps"], serde_json::json!([0.5, 0.25, 0.125]));
}

#[test]
fn walsh_star_skeleton_passes_axioms_on_reload() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fixture("star3.json");
    let sk = simulate(dir.path(), "walsh", &["--flow", "walsh", "--graph", s(&graph)]);
    let (c, r) = verify(&sk, &[]);
    assert_eq!(c, 0, "{r}");
    assert_eq!(r["axioms"]["sk1"], true);
    assert_eq!(r["axioms"]["sk2"], true);
    assert_eq!(r["axioms"]["sk3"], true);
}

#[test]
fn tanaka_repaired_with_zero_level_shell_is_a_strong_flow() {
    let dir = tempfile::tempdir().unwrap();
    let sk = simulate(dir.path(), "tanaka", &["--flow", "tanaka"]);
    let (c, r) = verify(&sk, &["--shell", "zero-level"]);
    assert_eq!(c, 0, "{r}");
    assert_eq!(r["strong_flow"]["flow"], "psi");
    assert_eq!(r["strong_flow"]["max_residual"], 0.0);
    assert_eq!(r["repair"]["samples"], 500);
    assert_eq!(r["repair"]["errors"].as_array().unwrap().len(), 0);
}

#[test]
fn unreadable_skeleton_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--skeleton", s(&dir.path().join("missing"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn tiny_sample_estimates_are_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est");
    let o = run(&[
        "estimate", "--what", "meeting", "--flow", "coalescing-bm", "--x", "0", "--y", "1", "--samples", "10",
        "--target", "oracle:0.02", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("reports.json"));
    assert_eq!(r[0]["verdict"], "inconclusive");
    assert_eq!(r[0]["samples"], 10);
    assert!(out.join("reports.csv").is_file() && out.join("metadata.json").is_file());
}

#[test]
fn meeting_estimate_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est");
    let o = run(&[
        "estimate", "--what", "meeting", "--flow", "coalescing-bm", "--x", "0", "--y", "1", "--samples", "20000",
        "--target", "oracle:0.02", "--seed", "5", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("reports.json"));
    assert_eq!(r[0]["verdict"], "pass");
    let csv = std::fs::read_to_string(out.join("reports.csv")).unwrap();
    assert!(csv.starts_with("name,estimate,ci_lo,ci_hi,target,verdict\n"), "{csv}");
}

#[test]
fn extend_and_export_produce_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let sk = dir.path().join("sk");
    let o = run(&["simulate", "--flow", "coalescing-bm", "--window", "0:0.2", "--starts", "net:0.1", "--out", s(&sk)]);
    assert_eq!(code(&o), 0);

    let ext = dir.path().join("ext");
    let o = run(&[
        "extend", "--skeleton", s(&sk), "--times", "0,0.1", "--points", "0;0.25;-0.5", "--shell", "zero-level",
        "--out", s(&ext),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let queries = std::fs::read_to_string(ext.join("queries.csv")).unwrap();
    assert_eq!(queries.lines().count(), 7);
    assert!(queries.starts_with("path_id,s,x,k,capped\n"));
    let paths = std::fs::read_to_string(ext.join("paths.csv")).unwrap();
    assert!(paths.starts_with("path_id,t,edge_id,coord\n"));

    let plot = dir.path().join("plot.csv");
    assert_eq!(code(&run(&["export-plotdata", "--skeleton", s(&sk), "--out", s(&plot)])), 0);
    let exported = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(exported, std::fs::read_to_string(sk.join("paths.csv")).unwrap());

    let est = dir.path().join("est");
    let o = run(&[
        "estimate", "--what", "distinct", "--flow", "coalescing-bm", "--region", "0:1", "--n", "10", "--samples", "5",
        "--out", s(&est),
    ]);
    assert!(matches!(code(&o), 0 | 1 | 3));
    let rep = dir.path().join("rep.csv");
    assert_eq!(code(&run(&["export-plotdata", "--reports", s(&est), "--out", s(&rep)])), 0);
    assert_eq!(
        std::fs::read_to_string(&rep).unwrap(),
        std::fs::read_to_string(est.join("reports.csv")).unwrap()
    );
    assert_eq!(code(&run(&["export-plotdata", "--out", s(&rep)])), 2);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for t in ["1", "3"] {
        let out = dir.path().join(format!("est{t}"));
        let o = run(&[
            "--threads", t, "estimate", "--what", "exit", "--flow", "tanaka", "--x", "0;0.25", "--dt", "1e-3",
            "--ladder", "0.25,0.0625", "--samples", "300", "--seed", "9", "--out", s(&out),
        ]);
        reports.push((code(&o), std::fs::read(out.join("reports.json")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
    let o = bin()
        .env("COALESCE_FLOW_THREADS", "0")
        .args(["simulate", "--flow", "coalescing-bm", "--out", s(&dir.path().join("x"))])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
