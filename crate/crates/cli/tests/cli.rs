use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fracsing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracsing")).args(args).env_remove("FRACSING_OUT").output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn constant_reports_exponents() {
    let out = fracsing(&["constant", "-n", "3", "-s", "0.5", "-p", "1.8"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["beta"].as_f64().unwrap(), 1.25);
    assert!((v["p_star"].as_f64().unwrap() - 0.4).abs() < 1e-14);
    assert_eq!(v["J1"].as_f64().unwrap(), 0.5);
    assert!(v.get("oracle").is_none());
    let a = v["A"].as_f64().unwrap();
    assert!((a - 0.531_979_157_720_292_9).abs() < 1e-15);
}

#[test]
fn constant_rejects_supercritical_exponent() {
    let out = fracsing(&["constant", "-n", "3", "-s", "0.5", "-p", "2.5"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("critical exponent") && msg.contains("= 2"), "{msg}");
}

#[test]
fn constant_oracle_agrees() {
    let out = fracsing(&["constant", "-n", "4", "-s", "0.3", "-p", "1.35", "--with-oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let o = &json(&out)["oracle"];
    assert!(o["relative_deviation"].as_f64().unwrap() <= 1e-6);
    assert_eq!(o["pass"], Value::Bool(true));
}

#[test]
fn unparsable_flags_exit_2() {
    assert_eq!(fracsing(&["constant", "-n", "three"]).status.code(), Some(2));
    assert_eq!(fracsing(&["solve", "--mesh", "12"]).status.code(), Some(2));
    assert_eq!(fracsing(&["verify", "nothing"]).status.code(), Some(2));
}

#[test]
fn verify_suites_pass() {
    for suite in ["pde", "scaling", "moving-sphere"] {
        let out = fracsing(&["verify", suite]);
        assert_eq!(out.status.code(), Some(0), "{suite}: {}", stderr(&out));
        let v = json(&out);
        assert_eq!(v["pass"], Value::Bool(true));
        assert!(stderr(&out).contains("PASS"));
    }
}

#[test]
fn verify_all_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = fracsing(&["verify", "all", "-n", "2", "-s", "0.75", "-p", "5", "--out-dir", d]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify-all.json")).unwrap()).unwrap();
    assert_eq!(v["suites"].as_array().unwrap().len(), 6);
    let check = fracsing(&["check-manifest", dir.path().join("manifest.json").to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(0));
}

#[test]
fn verify_with_invalid_params_exits_2() {
    let out = fracsing(&["verify", "pde", "-n", "3", "-s", "0.5", "-p", "1.2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_rejects_inverted_annulus() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracsing(&["solve", "--inner-r", "2", "--outer-r", "1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn solve_unperturbed_reports_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracsing(&["solve", "--perturbation", "0", "--mesh", "64x32", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let order = json(&out)["convergence"]["order"].as_f64().unwrap();
    assert!(order >= 1.8, "order {order}");
    assert!(stderr(&out).contains("observed order"));
}

fn read_energy(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn solve_perturbed_energy_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        fracsing(&["solve", "--perturbation", "0.05", "--mesh", "128x64", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = read_energy(&dir.path().join("energy.csv"));
    assert_eq!(rows[0], ["r", "E", "dE_formula", "dE_fd", "monotone_ok"]);
    assert_eq!(rows.len(), 26);
    assert!(rows[1..].iter().all(|r| r[4] == "true"));
    // 17 significant digits
    assert!(rows[1][1].split('e').next().unwrap().trim_start_matches('-').len() == 18);
    let field = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert!(field.starts_with("s,t,U\n"));
    assert_eq!(field.lines().count(), 1 + 129 * 65);
}

#[test]
fn solve_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = fracsing(&["solve", "--mesh", "32x16", "--out-dir", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for f in ["field.csv", "field.json", "energy.csv", "solve.json", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn tampered_output_fails_manifest_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracsing(&["solve", "--mesh", "32x16", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let m = dir.path().join("manifest.json");
    assert_eq!(fracsing(&["check-manifest", m.to_str().unwrap()]).status.code(), Some(0));
    fs::write(dir.path().join("energy.csv"), "r,E\n").unwrap();
    let check = fracsing(&["check-manifest", m.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(1));
    assert!(stderr(&check).contains("energy.csv"));
}

#[test]
fn solver_divergence_exits_3_with_damping_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracsing(&[
        "solve",
        "--inner-r",
        "0.2",
        "--outer-r",
        "5",
        "--mesh",
        "64x32",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("damping"));
}

#[test]
fn config_preloads_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"n": 2, "sigma": 0.75, "p": 5}"#).unwrap();
    let out = fracsing(&["constant", "--config", cfg.to_str().unwrap()]);
    assert_eq!(json(&out)["n"], 2);
    let out = fracsing(&["constant", "--config", cfg.to_str().unwrap(), "-n", "4", "-s", "0.3", "-p", "1.35"]);
    assert_eq!(json(&out)["n"], 4);
    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(fracsing(&["constant", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fracsing"))
        .args(["constant"])
        .env("FRACSING_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("constant.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}
