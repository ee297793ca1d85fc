use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use bora_cli::{cli_main, EXIT_CONFIG, EXIT_RUNTIME};

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("small.toml");
    let text = format!(
        r#"
case = "bernoulli_jobs"
m = 2
T = 6
runs = 2
master_seed = 5
policies = ["bora1", "bora3", "sbf"]
out_dir = "{}"
{extra}
[budget]
mode = "constant"
value = 33.9

[env]
nu = [25.0, 50.0]
"#,
        dir.join("out").display()
    );
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("bora").chain(args.iter().copied()))
}

#[test]
fn validate_shipped_configs() {
    for name in ["case1a.toml", "case1b.toml", "case1a_m20.toml", "case1b_m20.toml", "case2a.toml", "case2b.toml"] {
        let path = shipped(name);
        assert_eq!(run(&["validate", "--config", path.to_str().unwrap()]), 0, "{name}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["run"]), EXIT_CONFIG);
    assert_eq!(run(&["run", "--config", "x.toml", "--bogus"]), EXIT_CONFIG);
    assert_eq!(run(&["launch"]), EXIT_CONFIG);
    assert_eq!(run(&[]), EXIT_CONFIG);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["validate", "--config", dir.path().join("missing.toml").to_str().unwrap()]), EXIT_CONFIG);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "case = \"linear_marketing\"\nm = 3\nT = 5\nruns = 1\nmaster_seed = 1\npolicies = [\"sbf\"]\n[budget]\nmode = \"constant\"\nvalue = 10.0\n").unwrap();
    assert_eq!(run(&["validate", "--config", bad.to_str().unwrap()]), EXIT_CONFIG);
    assert_eq!(run(&["run", "--config", bad.to_str().unwrap()]), EXIT_CONFIG);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    // output directory path is occupied by a regular file
    let blocker = dir.path().join("blocked");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(run(&["run", "--config", config.to_str().unwrap(), "--out", blocker.to_str().unwrap()]), EXIT_RUNTIME);
}

#[test]
fn run_writes_outputs_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(run(&["run", "--config", config.to_str().unwrap(), "--out", a.to_str().unwrap()]), 0);
    assert_eq!(run(&["run", "--config", config.to_str().unwrap(), "--out", b.to_str().unwrap()]), 0);
    assert_eq!(run(&["run", "--config", config.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "6"]), 0);
    let trace_a = fs::read(a.join("trace.csv")).unwrap();
    assert_eq!(trace_a, fs::read(b.join("trace.csv")).unwrap());
    assert_ne!(trace_a, fs::read(c.join("trace.csv")).unwrap());

    let text = String::from_utf8(trace_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("policy,run,t,budget,reward,cumulative_reward,amounts"));
    assert_eq!(lines.count(), 3 * 2 * 6);
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some("policy,t,mean_cumulative,sd_cumulative"));
    assert_eq!(summary.lines().count(), 1 + 3 * 6);
    let svg = fs::read_to_string(a.join("cumulative_reward.svg")).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
}

#[test]
fn gp_slice_renders_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out = dir.path().join("slices");
    let code = run(&[
        "gp-slice",
        "--config",
        config.to_str().unwrap(),
        "--policy",
        "bora1,bora3",
        "--t",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    for policy in ["bora1", "bora3"] {
        let svg = fs::read_to_string(out.join(format!("gp_slice_{policy}_t5.svg"))).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let markers = doc.descendants().filter(|n| n.attribute("class") == Some("decision")).count();
        assert_eq!(markers, 5);
        assert!(doc.descendants().any(|n| n.attribute("fill-opacity").is_some()));
    }
    let sbf = run(&["gp-slice", "--config", config.to_str().unwrap(), "--policy", "sbf", "--t", "5"]);
    assert_eq!(sbf, EXIT_CONFIG);
    let unknown = run(&["gp-slice", "--config", config.to_str().unwrap(), "--policy", "ucb", "--t", "5"]);
    assert_eq!(unknown, EXIT_CONFIG);
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_bora");
    let status = Command::new(exe).arg("run").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&status.stderr).contains("Usage"));
    let ok =
        Command::new(exe).args(["validate", "--config", shipped("case1a.toml").to_str().unwrap()]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
