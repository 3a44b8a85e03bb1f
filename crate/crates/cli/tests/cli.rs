//! End-to-end tests of the binary: exit-code contract, output formats, and
//! byte-identical reproducibility.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ibonset"))
}

fn tmpdir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("ibonset-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write(dir: &PathBuf, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn stdout(out: &Output) -> &str {
    std::str::from_utf8(&out.stdout).unwrap()
}

const BSC_SPEC: &str = r#"{"kind": "bsc", "delta": 0.25}"#;
const INDEP_CSV: &str = "x,y0,y1\nx0,0.25,0.25\nx1,0.25,0.25\n";

#[test]
fn gen_then_onset_report() {
    let dir = tmpdir("onset");
    let spec = write(&dir, "spec.json", BSC_SPEC);
    let joint = dir.join("bsc.csv");
    let out = bin()
        .args(["gen", "-i"])
        .arg(&spec)
        .arg("-o")
        .arg(&joint)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");

    let out = bin()
        .args(["onset", "--tol", "1e-9", "-i"])
        .arg(&joint)
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(stdout(&out)).unwrap();
    let beta_c = report["onset"]["beta_c"].as_f64().unwrap();
    assert!((beta_c - 4.0).abs() < 1e-2, "beta_c = {beta_c}");
    let hat = report["chi2"]["beta_c_hat"].as_f64().unwrap();
    assert!((hat - 4.0).abs() < 1e-9, "beta_c_hat = {hat}");
    assert!(!report["config_sha256"].as_str().unwrap().is_empty());
}

#[test]
fn independent_joint_exits_no_onset() {
    let dir = tmpdir("indep");
    let joint = write(&dir, "indep.csv", INDEP_CSV);
    let out = bin().args(["onset", "-i"]).arg(&joint).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn malformed_input_is_usage_error() {
    let dir = tmpdir("bad");
    let joint = write(&dir, "bad.csv", "x,y0\nx0,not-a-number\n");
    let out = bin().args(["onset", "-i"]).arg(&joint).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = bin().arg("onset").output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn frontier_auto_grid_and_overlay() {
    let dir = tmpdir("frontier");
    let spec = write(&dir, "spec.json", BSC_SPEC);
    let joint = dir.join("bsc.csv");
    bin()
        .args(["gen", "-i"])
        .arg(&spec)
        .arg("-o")
        .arg(&joint)
        .output()
        .unwrap();
    let front = dir.join("front.csv");
    let out = bin()
        .args(["frontier", "--tol", "1e-9", "--beta-grid", "auto", "-i"])
        .arg(&joint)
        .arg("-o")
        .arg(&front)
        .output()
        .unwrap();
    // the BSC onset is degenerate (kappa <= 0), flagged via exit code 5;
    // the frontier CSVs must still be written
    assert_eq!(out.status.code(), Some(5), "{out:?}");
    let text = std::fs::read_to_string(&front).unwrap();
    assert!(text.starts_with("# ibonset v"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "beta,i_zx_bits,i_zy_bits,loss_bits,converged");
    assert_eq!(rows.len(), 1 + 25);
    // auto grid spans [beta_c - 0.2, beta_c + 1.0] around beta_c ~ 4
    let first: f64 = rows[1].split(',').next().unwrap().parse().unwrap();
    let last: f64 = rows.last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((first - 3.8).abs() < 0.01, "grid starts at {first}");
    assert!((last - 5.0).abs() < 0.01, "grid ends at {last}");
    assert!(dir.join("front_perturbative.csv").exists());
}

#[test]
fn fig2_sweep_deterministic_and_reproducible() {
    let run = || {
        let out = bin()
            .args([
                "fig2",
                "--family",
                "gaussian",
                "--params",
                "2.0,1.0", // deliberately unsorted
                "--tol",
                "1e-7",
                "--jobs",
                "2",
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        stdout(&out).to_string()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b, "identical config+seed must be byte-identical");
    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "mu,i_xy_bits,beta_c,beta_c_hat,i1_zy_bits,kappa");
    let p0: f64 = rows[1].split(',').next().unwrap().parse().unwrap();
    let p1: f64 = rows[2].split(',').next().unwrap().parse().unwrap();
    assert!(p0 < p1, "rows must be sorted by sweep parameter");
}

#[test]
fn gauss_closed_form_vs_discretized() {
    let dir = tmpdir("gauss");
    let g = write(
        &dir,
        "g.json",
        r#"{"sigma_x": [[1.0]], "sigma_y": [[1.0]], "sigma_xy": [[0.5]]}"#,
    );
    let out = bin()
        .args(["gauss", "--tol", "1e-7", "-i"])
        .arg(&g)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value = serde_json::from_str(stdout(&out)).unwrap();
    assert_eq!(report["closed_form"]["beta_c"].as_f64().unwrap(), 4.0);
    let rel = report["discretized"]["relative_error"].as_f64().unwrap();
    assert!(rel < 0.02, "discretized off by {rel}");
}

#[test]
fn validate_accepts_generated_joint() {
    let dir = tmpdir("validate");
    let spec = write(
        &dir,
        "spec.json",
        r#"{"kind": "noisy_function", "f": "quadratic", "sigma": 0.3}"#,
    );
    let joint = dir.join("nf.csv");
    bin()
        .args(["gen", "-i"])
        .arg(&spec)
        .arg("-o")
        .arg(&joint)
        .output()
        .unwrap();
    let out = bin().args(["validate", "-i"]).arg(&joint).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).starts_with("ok:"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tmpdir("config");
    let cfg = write(&dir, "cfg.json", r#"{"tol": 1e-6, "seed": 7}"#);
    let spec = write(&dir, "spec.json", BSC_SPEC);
    let joint = dir.join("bsc.csv");
    bin()
        .args(["gen", "-i"])
        .arg(&spec)
        .arg("-o")
        .arg(&joint)
        .output()
        .unwrap();
    let out = bin()
        .args(["onset", "--config"])
        .arg(&cfg)
        .args(["--seed", "9", "-i"])
        .arg(&joint)
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(stdout(&out)).unwrap();
    assert_eq!(report["config"]["tol"].as_f64().unwrap(), 1e-6);
    assert_eq!(report["config"]["seed"].as_u64().unwrap(), 9);
}
