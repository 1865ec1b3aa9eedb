use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const LEBESGUE_B0: &str = r#"
[operator]
kind = "demo"
name = "lebesgue"

[certify]
b_grid = [0.0]
"#;

const DIVERGENT: &str = r#"
[space]
dim = 1

[operator]
kind = "affine"
matrix = [[-1e6]]
offset = [1.0]

[iterate]
x0 = [1.0]
"#;

const VIP_BOX: &str = r#"
[space]
dim = 2

[vip]
gamma = 0.5
set = { kind = "box", lo = [0.0, 0.0], hi = [1.0, 1.0] }
inner_operator = { kind = "affine", matrix = [[1.0, 0.0], [0.0, 1.0]], offset = [-2.0, 0.5] }
"#;

fn kfp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfp")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_runtime(text: &str) -> Value {
    let mut v: Value = serde_json::from_str(text).unwrap();
    v.as_object_mut().unwrap().remove("runtime_ms");
    v
}

#[test]
fn demo_writes_trace_summary_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let plot = dir.path().join("plot.svg");
    let out = kfp(&["demo", "kannan-affine", "--out", out_dir.to_str().unwrap(), "--plot", plot.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = stdout_json(&out);
    assert_eq!(summary["fixed_point"]["x_star"], serde_json::json!([0.5]));
    assert_eq!(summary["fixed_point"]["lambda"], 0.5);
    assert_eq!(without_runtime(&fs::read_to_string(out_dir.join("summary.json")).unwrap()), without_runtime(&String::from_utf8_lossy(&out.stdout)));

    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("n,step_norm,residual,apriori_bound,aposteriori_bound\n"));
    assert!(fs::read_to_string(plot).unwrap().starts_with("<svg"));
}

#[test]
fn demo_lebesgue_summary() {
    let out = kfp(&["demo", "lebesgue"]);
    assert_eq!(out.status.code(), Some(0));
    let s = stdout_json(&out);
    assert_eq!(s["fixed_point"]["x_star"], serde_json::json!([0.25, 0.25, 0.25, 0.25]));
    assert_eq!(s["fixed_point"]["lambda"], 0.25);
    assert_eq!(s["certificate"]["b"], 3.0);
    assert_eq!(s["certificate"]["alpha"], 0.5);
    assert!(s["certificate"]["a_hat"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn demo_vip_ball_summary() {
    let out = kfp(&["demo", "vip-ball"]);
    assert_eq!(out.status.code(), Some(0));
    let s = stdout_json(&out);
    assert_eq!(s["fixed_point"]["x_star"], serde_json::json!([-1.0, 0.0]));
    assert!(s["vi_residual"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    for demo in ["kannan-affine", "lebesgue", "vip-ball", "cosine"] {
        let runs: Vec<_> = (0..2)
            .map(|i| {
                let d = dir.path().join(format!("{demo}-{i}"));
                let out = kfp(&["demo", demo, "--seed", "9", "--out", d.to_str().unwrap()]);
                assert_eq!(out.status.code(), Some(0), "{demo}");
                (fs::read(d.join("trace.csv")).unwrap(), without_runtime(&fs::read_to_string(d.join("summary.json")).unwrap()))
            })
            .collect();
        assert_eq!(runs[0], runs[1], "{demo}");
    }
}

#[test]
fn seed_flag_changes_the_digest() {
    let a = stdout_json(&kfp(&["demo", "cosine", "--seed", "1"]));
    let b = stdout_json(&kfp(&["demo", "cosine", "--seed", "2"]));
    assert_ne!(a["input_digest"], b["input_digest"]);
}

#[test]
fn certify_refutation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lebesgue.toml", LEBESGUE_B0);
    let out = kfp(&["certify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let cert = &stdout_json(&out)["certificate"];
    assert_eq!(cert["passing"], false);
    assert_eq!(cert["witness_alpha"], 0.5);
    assert!((cert["witness"]["ratio"].as_f64().unwrap() - 3f64.sqrt()).abs() < 1e-9);
    assert_eq!(cert["witness"]["x"], serde_json::json!([0.0, 0.0, 0.0, 0.0]));
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "div.toml", DIVERGENT);
    let out = kfp(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_json(&out)["notes"][0].as_str().unwrap().contains("diverged"));
    assert!(fs::read_to_string(dir.path().join("trace.csv")).unwrap().lines().count() > 2);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let alpha = write(dir.path(), "alpha.toml", "[space]\ndim = 1\n[operator]\nkind = \"affine\"\nmatrix = [[0.5]]\noffset = [0.0]\n[certify]\nalpha_grid = [1.2]\n");
    let out = kfp(&["certify", "--config", &alpha]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("alpha must lie in (0,1)"));

    let weights = write(dir.path(), "weights.json", r#"{"space": {"dim": 2, "weights": [1.0]}}"#);
    let out = kfp(&["solve", "--config", &weights]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("space.weights"));

    let unknown = write(dir.path(), "unknown.toml", "[space]\ndim = 1\nsize = 2\n");
    let out = kfp(&["solve", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(kfp(&["demo", "spiral"]).status.code(), Some(1));
    assert_eq!(kfp(&["solve"]).status.code(), Some(1));
    assert_eq!(kfp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(kfp(&["analyze", "--config", "x.toml", "--check", "bogus"]).status.code(), Some(1));
    assert_eq!(kfp(&["solve", "--config", "/nonexistent/problem.toml"]).status.code(), Some(1));
    assert_eq!(kfp(&["--help"]).status.code(), Some(0));
}

#[test]
fn analyze_runs_only_the_requested_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.toml", "[operator]\nkind = \"demo\"\nname = \"kannan-affine\"\n");
    let out = kfp(&["analyze", "--config", &cfg, "--check", "periodic", "--check", "ulam"]);
    assert_eq!(out.status.code(), Some(0));
    let kinds: Vec<Value> = stdout_json(&out)["stability"].as_array().unwrap().iter().map(|r| r["kind"].clone()).collect();
    assert_eq!(kinds, vec![Value::from("PROPERTY_P"), Value::from("ULAM_HYERS")]);
}

#[test]
fn vip_subcommand_reports_the_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "vip.toml", VIP_BOX);
    let out = kfp(&["vip", "--config", &cfg, "--format", "json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = stdout_json(&out);
    // S x = x - (2, -0.5) on [0, 1]^2: the solution is the projection of (2, -0.5).
    let x: Vec<f64> = s["fixed_point"]["x_star"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((x[0] - 1.0).abs() < 1e-9 && x[1].abs() < 1e-9, "{x:?}");
    assert!(s["vi_residual"].as_f64().unwrap() >= -1e-9);
    let trace: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    assert!(!trace["rows"].as_array().unwrap().is_empty());
}

#[test]
fn output_paths_from_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("nested/t.csv");
    let summary = dir.path().join("s.json");
    let text = format!(
        "[operator]\nkind = \"demo\"\nname = \"lebesgue\"\n[output]\ntrace_path = {:?}\nsummary_path = {:?}\n",
        trace.to_str().unwrap(),
        summary.to_str().unwrap()
    );
    let cfg = write(dir.path(), "o.toml", &text);
    assert_eq!(kfp(&["solve", "--config", &cfg]).status.code(), Some(0));
    assert!(trace.exists() && summary.exists());
}
