use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lrinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrinv"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
name = "small_ramp"
mass = 1.0
t1 = 0.5
dt_record = 0.05
n_max = 24
n_check = 3

[drive]
kind = "linear_ramp"
offset = 0.2
slope = 0.4

[linear_seed]
a = 1.0

[initial]
q0 = 0.5
p0 = -0.5
"#;

fn write_scenario(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn check_algebra_passes() {
    let out = lrinv(&["check-algebra"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("q^2p^2"), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn solve_writes_report_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path(), "small.toml", SMALL);
    let out_dir = dir.path().join("out");
    let out = lrinv(&["solve", "--scenario", &scen, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    let r = report(&out_dir);
    assert_eq!(r["passed"], Value::Bool(true));
    let names: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for expected in [
        "small_ramp/eigen_residual",
        "small_ramp/particular_phase_error",
        "small_ramp/cross_invariant_power2_defect",
    ] {
        assert!(names.contains(&expected), "{names:?}");
    }
    assert_eq!(r["scenarios"][0]["name"], "small_ramp");

    let scen_dir = out_dir.join("small_ramp");
    let header = |f: &str| {
        std::fs::read_to_string(scen_dir.join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(header("coefficients.csv"), "t,D,E,F,Ap,Bp,Cp");
    assert_eq!(header("phases.csv"), "t,n,phi");
    assert_eq!(header("fidelity_n3.csv"), "t,fidelity,phase_error");
    assert_eq!(header("moments.csv"), "t,norm,q_mean,p_mean,q_var,energy");
    assert_eq!(header("snapshot_general_t1.csv"), "q,re,im");
    let row = std::fs::read_to_string(scen_dir.join("coefficients.csv")).unwrap();
    let field = row.lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string();
    assert_eq!(field, "1.0000000000000000e0");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = lrinv(&[
            "solve",
            "--scenario",
            &scen,
            "--out",
            d.to_str().unwrap(),
            "--jobs",
            "1",
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["phases.csv", "fidelity_n0.csv", "moments.csv", "snapshot_oracle_t1.csv"] {
        let x = std::fs::read(a.join("small_ramp").join(f)).unwrap();
        let y = std::fs::read(b.join("small_ramp").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn impossible_tolerance_fails_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path(), "small.toml", SMALL);
    let out = lrinv(&["oracle-only", "--scenario", &scen, "--tol-scale", "1e-12"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write_scenario(dir.path(), "typo.toml", "mas = 1.0\n");
    assert_eq!(lrinv(&["solve", "--scenario", &typo]).status.code(), Some(2));
    assert_eq!(
        lrinv(&["solve", "--scenario", "no_such_scenario"]).status.code(),
        Some(2)
    );
    assert_eq!(lrinv(&["frobnicate"]).status.code(), Some(2));

    let harmonic = write_scenario(
        dir.path(),
        "harmonic.toml",
        "t1 = 0.2\n[omega]\nkind = \"constant\"\nvalue = 1.0\n",
    );
    let out = lrinv(&["volkov", "--scenario", &harmonic]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let hyperbolic = write_scenario(
        dir.path(),
        "hyp.toml",
        "t1 = 0.2\n[quad_seed]\nd = 1.0\ne = 2.0\nf = 1.0\n",
    );
    assert_eq!(lrinv(&["solve", "--scenario", &hyperbolic]).status.code(), Some(2));
}

#[test]
fn volkov_and_merge() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path(), "small.toml", SMALL);
    let v = dir.path().join("v");
    let o = dir.path().join("o");
    let out = lrinv(&[
        "volkov",
        "--scenario",
        &scen,
        "--k",
        "0",
        "--k",
        "1",
        "--out",
        v.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(v.join("small_ramp").join("volkov_k1.csv")).unwrap();
    assert!(csv.starts_with("t,eigen_residual,tdse_residual\n"));
    assert_eq!(
        lrinv(&["oracle-only", "--scenario", &scen, "--out", o.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );

    let merged = dir.path().join("merged.json");
    let out = lrinv(&[
        "report-merge",
        v.join("report.json").to_str().unwrap(),
        o.join("report.json").to_str().unwrap(),
        "--out",
        merged.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&merged).unwrap()).unwrap();
    let n = |d: &Path| report(d)["checks"].as_array().unwrap().len();
    assert_eq!(m["checks"].as_array().unwrap().len(), n(&v) + n(&o));

    // the same report twice would duplicate every check
    let dup = lrinv(&[
        "report-merge",
        v.join("report.json").to_str().unwrap(),
        v.join("report.json").to_str().unwrap(),
        "--out",
        merged.to_str().unwrap(),
    ]);
    assert_eq!(dup.status.code(), Some(2));
}
