use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SHORT: [&str; 6] = ["--burn-in", "50", "--sweeps", "200", "--thin", "2"];

fn surveymix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surveymix"))
        .args(args)
        .env_remove("SURVEYMIX_OUT")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(case: &str, seed: &str, out: &Path) -> Output {
    surveymix(&["simulate", "--case", case, "--seed", seed, "--out", path(out)])
}

#[test]
fn simulate_writes_one_row_per_sampled_unit() {
    let dir = TempDir::new().unwrap();
    let out = simulate("case1", "7", dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sample.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("y,stratum,weight"));
    assert_eq!(csv.lines().count(), 1501);
    assert!(dir.path().join("sample.json").exists());
}

#[test]
fn simulate_is_byte_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    simulate("case4", "3", a.path());
    simulate("case4", "3", b.path());
    for f in ["sample.csv", "sample.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn unknown_case_exits_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let out = simulate("case9", "1", dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scenario"));
}

#[test]
fn missing_design_choice_is_a_usage_error() {
    let out = surveymix(&["simulate", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_writes_a_four_column_grid_summary() {
    let dir = TempDir::new().unwrap();
    simulate("case1", "7", dir.path());
    let sample = dir.path().join("sample.csv");
    let mut args = vec!["fit", "--sample", path(&sample), "--method", "proposed", "--out", path(dir.path())];
    args.extend(SHORT);
    let out = surveymix(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("proposed.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "y,mean,lower,upper");
    assert_eq!(lines.len(), 101);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
}

#[test]
fn no_adjust_switches_to_unadjusted_weights() {
    let dir = TempDir::new().unwrap();
    simulate("case1", "7", dir.path());
    let sample = dir.path().join("sample.csv");
    for extra in [None, Some("--no-adjust")] {
        let mut args = vec!["fit", "--sample", path(&sample), "--out", path(dir.path())];
        args.extend(SHORT);
        args.extend(extra);
        assert!(surveymix(&args).status.success());
    }
    let adjusted = std::fs::read_to_string(dir.path().join("proposed.csv")).unwrap();
    let unadjusted = std::fs::read_to_string(dir.path().join("unadjusted.csv")).unwrap();
    assert_ne!(adjusted, unadjusted);
}

#[test]
fn fit_on_missing_file_exits_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = surveymix(&["fit", "--sample", path(&missing), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_counts_uses_the_support() {
    let dir = TempDir::new().unwrap();
    simulate("case3", "2", dir.path());
    let sample = dir.path().join("sample.csv");
    let mut args = vec!["fit", "--sample", path(&sample), "--method", "gp", "--out", path(dir.path())];
    args.extend(SHORT);
    assert!(surveymix(&args).status.success());
    let csv = std::fs::read_to_string(dir.path().join("gp.csv")).unwrap();
    assert!(csv.starts_with("k,mean,lower,upper\n0,"));
    assert_eq!(csv.lines().count(), 102);
}

fn compare(out: &Path, methods: &str, extra: &[&str]) -> Output {
    let mut args = vec!["--json", "compare", "--case", "case2", "--methods", methods, "--seed", "5", "--out", path(out)];
    args.extend(SHORT);
    args.extend(extra);
    surveymix(&args)
}

#[test]
fn compare_reports_every_method_with_coverage() {
    let dir = TempDir::new().unwrap();
    let out = compare(dir.path(), "proposed,unadjusted,ht,re,gp", &["--trace"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout["command"], "compare");

    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 5);
    for m in methods {
        let cov = m["coverage"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&cov));
        assert!(m["ise"].as_f64().unwrap() >= 0.0);
        let name = m["method"].as_str().unwrap();
        let csv = std::fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
        assert!(csv.starts_with("y,mean,lower,upper,truth\n"));
    }
    assert_eq!(report["seeds"]["seed"], 5);
    assert!(dir.path().join("timing.json").exists());
    let trace = std::fs::read_to_string(dir.path().join("proposed.trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 100);
}

#[test]
fn compare_report_is_byte_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert!(compare(a.path(), "proposed,ht", &[]).status.success());
    assert!(compare(b.path(), "proposed,ht", &["--sequential"]).status.success());
    for f in ["report.json", "proposed.csv", "ht.csv"] {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        // the report records the execution mode, so compare it without that field
        if f == "report.json" {
            let mut x: Value = serde_json::from_slice(&x).unwrap();
            let mut y: Value = serde_json::from_slice(&y).unwrap();
            x["config"]["exec"] = Value::Null;
            y["config"]["exec"] = Value::Null;
            assert_eq!(x, y);
        } else {
            assert_eq!(x, y, "{f}");
        }
    }
    let c = TempDir::new().unwrap();
    assert!(compare(c.path(), "proposed,ht", &[]).status.success());
    assert_eq!(
        std::fs::read(a.path().join("report.json")).unwrap(),
        std::fs::read(c.path().join("report.json")).unwrap()
    );
}

#[test]
fn compare_fails_when_a_method_cannot_run() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["compare", "--case", "case3", "--methods", "proposed,weighted_kde", "--out", path(dir.path())];
    args.extend(SHORT);
    let out = surveymix(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn unknown_method_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = compare(dir.path(), "proposed,magic", &[]);
    assert_eq!(out.status.code(), Some(2));
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(stdout["error"].as_str().unwrap().contains("magic"));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = TempDir::new().unwrap();
    simulate("case1", "7", dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[schedule]\nburn_in = 20\nsweeps = 2000\nthin = 20\n\n[grid]\nmin = -4.0\nmax = 4.0\npoints = 41\n").unwrap();
    let sample = dir.path().join("sample.csv");
    let out = surveymix(&[
        "fit", "--sample", path(&sample), "--method", "ht", "--config", path(&cfg), "--grid-points", "21", "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ht.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    assert!(csv.lines().nth(1).unwrap().starts_with("-4,"));

    std::fs::write(&cfg, "[schedule]\nburn = 5\n").unwrap();
    let out = surveymix(&["fit", "--sample", path(&sample), "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_directory_defaults_to_environment_variable() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_surveymix"))
        .args(["simulate", "--case", "case1", "--seed", "1"])
        .env("SURVEYMIX_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("sample.csv").exists());
}

#[test]
fn custom_design_file_is_simulated() {
    let dir = TempDir::new().unwrap();
    let design = dir.path().join("two.json");
    std::fs::write(
        &design,
        r#"{"total_size": 3000, "strata": [
            {"id": 1, "population_size": 1000, "sample_size": 40,
             "density": {"family": "normal_mixture", "components": [{"weight": 1.0, "mean": 0.0, "sd": 1.0}]}},
            {"id": 2, "population_size": 2000, "sample_size": 10,
             "density": {"family": "normal_mixture", "components": [{"weight": 1.0, "mean": 3.0, "sd": 0.5}]}}
        ]}"#,
    )
    .unwrap();
    let out = surveymix(&["--json", "simulate", "--spec", path(&design), "--seed", "1", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["rows"], 50);
}
