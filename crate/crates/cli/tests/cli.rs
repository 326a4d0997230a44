use std::path::Path;
use std::process::{Command, Output};

fn lsvlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsvlab"))
        .args(args)
        .env("LSVLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn memory_loss(min: f64, max: f64) -> String {
    format!(
        r#"{{
  "experiment": {{
    "kind": "memory_loss",
    "sequence": {{ "kind": "constant", "gamma": 0.5, "gamma_star": 0.5, "length": 4096 }},
    "g": {{ "kind": "cos_perturbation", "amplitude": 0.5 }},
    "n_grid": {{ "dyadic": [6, 12] }},
    "fit_window": [64, 4096]
  }},
  "output": "out",
  "assertions": [{{ "metric": "slope", "series": "tv", "min": {min}, "max": {max} }}]
}}"#
    )
}

#[test]
fn memory_loss_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ml.json", &memory_loss(-2.25, -1.75));
    let out = lsvlab(&["memory-loss", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("slope"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("out/memory-loss.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,tv"));
    assert_eq!(lines.count(), 7);
    assert!(dir.path().join("out/summary.json").exists());
}

#[test]
fn impossible_threshold_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ml.json", &memory_loss(-100.0, -10.0));
    let out = lsvlab(&["memory-loss", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap();
    assert!(summary.contains("\"passed\": false"));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "blocker", "");
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"experiment": {"kind": "counterexample", "steps": 10, "paths": 10}, "output": "blocker/sub"}"#,
    );
    let out = lsvlab(&["counterexample", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blocker"));
}

#[test]
fn config_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let bad = memory_loss(-2.25, -1.75).replace("\"gamma_star\": 0.5", "\"gamma_star\": 1.2");
    let cfg = write(dir.path(), "bad.json", &bad);
    let out = lsvlab(&["memory-loss", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma_star"));

    let cfg = write(dir.path(), "ok.json", &memory_loss(-2.25, -1.75));
    let out = lsvlab(&["moments", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("memory-loss"));

    let out = lsvlab(&["tails", "--config", "/nonexistent/run.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_and_out_overrides_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "qv.json",
        r#"{"experiment": {"kind": "qv_check", "beta": 3, "lengths": [8, 16, 32, 64], "samples": 2000}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = lsvlab(&["qv-check", "--config", &cfg, "--seed", "17", "--out", d.to_str().unwrap()]);
        assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    }
    let read = |d: &Path| std::fs::read_to_string(d.join("qv-check.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert!(read(&a).starts_with("len,sigma_norm,sigma_rhs,sigma_ratio,omega_norm,omega_rhs,omega_ratio\n"));
    let summary = std::fs::read_to_string(a.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 17"));
}

#[test]
fn every_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let seq = r#"{"kind": "constant", "gamma": 0.75, "gamma_star": 0.75, "length": 200}"#;
    let cases = [
        ("partition", format!(r#"{{"kind": "partition", "sequence": {seq}, "count": 50}}"#), "n,x,y"),
        (
            "density",
            format!(r#"{{"kind": "density", "sequence": {seq}, "grid": {{"cells": 512, "layout": "graded"}}, "steps": 20}}"#),
            "left,right,value",
        ),
        (
            "moments",
            format!(
                r#"{{"kind": "moments", "sequence": {seq}, "grid": {{"cells": 512, "layout": "graded"}}, "p": [1, 2], "n_grid": [10, 20, 50, 100, 200], "samples": 2000}}"#
            ),
            "n,ES*^1,ES*^2,centering_z",
        ),
        (
            "tails",
            format!(r#"{{"kind": "tails", "sequence": {seq}, "grid": {{"cells": 512, "layout": "graded"}}, "n": 200, "samples": 5000}}"#),
            "t,tail",
        ),
        (
            "deviations",
            format!(
                r#"{{"kind": "deviations", "sequence": {seq}, "grid": {{"cells": 512, "layout": "graded"}}, "n_grid": [10, 20, 50, 100, 200], "samples": 2000, "epsilon": 0.1, "tau": 0.9}}"#
            ),
            "n,large,moderate",
        ),
        (
            "counterexample",
            r#"{"kind": "counterexample", "steps": 100, "paths": 100}"#.to_string(),
            "n,min_s_start_a,max_s_start_a,min_s_start_bc,max_s_start_bc",
        ),
        (
            "renewal-tails",
            r#"{"kind": "renewal_tails", "renewal": {"theta": 0.3, "first": {"kind": "power", "exponent": 2}, "h": {"kind": "power", "exponent": 3}}, "n_max": 200, "check": {"kind": "power", "beta": 3, "beta_prime": 2}, "mc_samples": 20000}"#.to_string(),
            "n,tail_exact,tail_mc,bound_value,ratio",
        ),
    ];
    for (i, (cmd, experiment, header)) in cases.iter().enumerate() {
        let cfg = write(
            dir.path(),
            &format!("c{i}.json"),
            &format!(r#"{{"experiment": {experiment}, "output": "o{i}", "seed": 5}}"#),
        );
        let out = lsvlab(&[cmd, "--config", &cfg]);
        assert!(
            matches!(out.status.code(), Some(0) | Some(1)),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let csv = std::fs::read_to_string(dir.path().join(format!("o{i}/{cmd}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some(*header), "{cmd}");
    }
}
