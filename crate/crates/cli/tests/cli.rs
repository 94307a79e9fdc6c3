use std::path::Path;
use std::process::Command;
use std::time::Instant;

use serde_json::{json, Value};

fn maxent() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maxent"))
}

fn smoke_config(out: &Path) -> Value {
    json!({
        "model": {"n_sites": 2, "coupling": 1.0, "periodic": true},
        "initial": {"beta": 1.0, "c1": 3.0, "c2": 3.0, "zeta": 1.0, "x0": -0.3},
        "basis_level": 2,
        "geometries": ["kmb", "covar"],
        "t_max": 2.0,
        "n_points": 21,
        "outputs": {"directory": out},
        "seed": 3
    })
}

fn write_config(dir: &Path, name: &str, config: &Value) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

#[test]
fn smoke_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "c.json", &smoke_config(&out));
    let start = Instant::now();
    let status = maxent().arg("run").arg(&cfg).output().unwrap();
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert_eq!(
        status.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );

    for name in [
        "exact.csv",
        "projected_kmb.csv",
        "restricted_kmb.csv",
        "projected_covar.csv",
        "restricted_covar.csv",
        "diagnostics.csv",
        "manifest.json",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let restricted = std::fs::read_to_string(out.join("restricted_kmb.csv")).unwrap();
    let mut lines = restricted.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,exp_n,exp_n2,exp_H,exp_x,exp_x2,exp_b5,trace_rho,entropy,relent_vs_free,\
         kmb_dist_vs_free,delta,delta_tilde,error_bound"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.iter().all(|v| v.is_finite())));
    assert!((rows[20][0] - 2.0).abs() < 1e-15);

    let exact = std::fs::read_to_string(out.join("exact.csv")).unwrap();
    let row = exact.lines().nth(1).unwrap();
    assert!(row.ends_with("NaN,NaN,NaN,NaN,NaN"), "{row}");

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["config"]["seed"], 3);
    assert!(manifest["phases"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p["seconds"].as_f64().unwrap() >= 0.0));
    let warnings = manifest["warnings"].as_array().unwrap();
    let mut unique = warnings.clone();
    unique.dedup();
    assert_eq!(unique.len(), warnings.len());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let cfg = write_config(dir.path(), &format!("{run}.json"), &smoke_config(&out));
        assert!(maxent()
            .arg("run")
            .arg(&cfg)
            .output()
            .unwrap()
            .status
            .success());
        let files: Vec<Vec<u8>> = ["exact.csv", "restricted_covar.csv", "diagnostics.csv"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .collect();
        bodies.push(files);
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn validate_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let good = write_config(dir.path(), "good.json", &smoke_config(&out));
    let ok = maxent().arg("validate").arg(&good).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(!out.exists());

    let cases = [
        ("/t_max", json!(0.0), "t_max must be positive"),
        (
            "/model/n_sites",
            json!(20),
            "exceeds the configured maximum",
        ),
        ("/geometries", json!([]), "geometries"),
        ("/n_points", json!(1), "n_points"),
    ];
    for (pointer, value, needle) in cases {
        let mut c = smoke_config(&out);
        *c.pointer_mut(pointer).unwrap() = value;
        let path = write_config(dir.path(), "bad.json", &c);
        let res = maxent().arg("validate").arg(&path).output().unwrap();
        assert_eq!(res.status.code(), Some(2));
        let stdout = String::from_utf8_lossy(&res.stdout);
        assert!(stdout.contains(needle), "{pointer}: {stdout}");

        let res = maxent().arg("run").arg(&path).output().unwrap();
        assert_eq!(res.status.code(), Some(2));
    }
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, "{\"model\": ").unwrap();
    assert_eq!(
        maxent().arg("run").arg(&path).status().unwrap().code(),
        Some(2)
    );
    let missing = dir.path().join("absent.json");
    assert_eq!(
        maxent()
            .arg("validate")
            .arg(&missing)
            .status()
            .unwrap()
            .code(),
        Some(2)
    );
}

#[test]
fn numerical_failure_exits_three_and_flags_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut c = smoke_config(&out);
    c["solver"] = json!({"max_steps": 1});
    let path = write_config(dir.path(), "c.json", &c);
    let res = maxent().arg("run").arg(&path).output().unwrap();
    assert_eq!(
        res.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "incomplete");
    assert!(manifest["error"].as_str().unwrap().contains("restricted["));
}

#[test]
fn preset_experiment_rejects_other_betas() {
    let dir = tempfile::tempdir().unwrap();
    let res = maxent()
        .args(["paper-experiment", "--beta", "0.5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let res = maxent().args(["selftest", "--seed", "9"]).output().unwrap();
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stdout)
    );
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 8);
}
