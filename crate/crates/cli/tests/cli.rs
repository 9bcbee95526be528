//! End-to-end tests of the `corrgcv` binary and the command implementations.

use std::path::{Path, PathBuf};
use std::process::Command;

const CONFIG: &str = r#"
master_seed = 11
sigma_eps = 0.4
seeds = 2

[covariance]
family = "identity"
n = 16

[kernel]
family = "exponential"
xi = 8.0

[grid]
t = [32, 48]
lambda = [0.1]
tau = [2]

[estimators]
set = ["corrgcv", "gcv1", "gcv2"]
s_kernel = "analytic"
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corrgcv"))
}

fn setup(name: &str) -> (PathBuf, PathBuf) {
    let dir = std::env::temp_dir().join(format!("corrgcv_cli_test_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("config.toml");
    std::fs::write(&config, CONFIG).unwrap();
    (dir, config)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn theory_is_deterministic_and_writes_manifest() {
    let (dir, config) = setup("theory");
    let out1 = dir.join("run1");
    let out2 = dir.join("run2");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["theory", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = read(&out1.join("theory.csv"));
    let b = read(&out2.join("theory.csv"));
    assert_eq!(a, b, "theory output must be bit-identical across runs");
    assert!(a.starts_with("family,kernel_params,n,t,q,lambda,sigma_eps,tau,source,value,stderr,status"));
    assert!(a.contains("theory_corr_test"), "tau rows present");

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out1.join("theory_manifest.json"))).unwrap();
    assert_eq!(manifest["subcommand"], "theory");
    assert!(manifest["config_hash"].as_str().unwrap().len() == 16);
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn simulate_reproduces_with_same_seeds() {
    let (dir, config) = setup("simulate");
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success(), "simulate exits 0 on a clean sweep");
    }
    assert_eq!(
        read(&out1.join("simulate.csv")),
        read(&out2.join("simulate.csv")),
        "same seeds produce identical tables"
    );
    // schema stability: fixed column count on every row
    let text = read(&out1.join("simulate.csv"));
    let cols = text.lines().next().unwrap().split(',').count();
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').count(), cols, "row {line}");
    }
    for source in ["theory", "empirical", "corrgcv", "gcv1", "gcv2", "empirical_corr_test"] {
        assert!(text.contains(source), "missing source {source}");
    }
}

#[test]
fn seed_override_changes_empirical_rows() {
    let (dir, config) = setup("seed_override");
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    let mut c1 = bin();
    c1.args(["simulate", "--config"]).arg(&config).arg("--out").arg(&out1);
    let mut c2 = bin();
    c2.args(["simulate", "--config"]).arg(&config).arg("--out").arg(&out2).args(["--seed", "999"]);
    assert!(c1.status().unwrap().success());
    assert!(c2.status().unwrap().success());
    assert_ne!(read(&out1.join("simulate.csv")), read(&out2.join("simulate.csv")));
}

#[test]
fn estimate_runs_on_generated_and_file_data() {
    let (dir, config) = setup("estimate");
    let out = dir.join("out");
    let status = bin()
        .args(["estimate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let record: serde_json::Value = serde_json::from_str(&read(&out.join("estimate.json"))).unwrap();
    assert!(record["corrgcv"]["r_out"].as_f64().unwrap() > 0.0);
    assert!(record["corrgcv"]["kappa"].as_f64().unwrap() > 0.0);
    assert!(record["gcv1"].as_f64().is_some());

    // dataset from file: y column then features
    let data = dir.join("data.csv");
    let mut lines = vec!["y,x1,x2".to_string()];
    for i in 0..24 {
        let x1 = (i as f64 * 0.37).sin();
        let x2 = (i as f64 * 0.11).cos();
        lines.push(format!("{},{x1},{x2}", 0.4 * x1 - 0.2 * x2 + 0.01 * i as f64));
    }
    std::fs::write(&data, lines.join("\n")).unwrap();
    let status = bin()
        .args(["estimate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--data")
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());

    // undersized dataset is an input-validation error
    std::fs::write(&data, "y,x1\n1.0,2.0\n").unwrap();
    let output = bin()
        .args(["estimate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("T = 1 < 2"), "stderr: {err}");
}

#[test]
fn malformed_config_fails_with_field_diagnostics() {
    let (dir, config) = setup("badconfig");
    std::fs::write(&config, CONFIG.replace("xi = 8.0", "xi = -8.0")).unwrap();
    let output = bin()
        .args(["theory", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("xi"), "field named in diagnostics: {err}");

    // syntactically broken TOML carries line/column information
    std::fs::write(&config, "sigma_eps = [not toml").unwrap();
    let output = bin()
        .args(["theory", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("line 1"), "parse location in diagnostics: {err}");
}

#[test]
fn simulate_partial_failure_exits_two() {
    let (dir, config) = setup("partial");
    // an ensemble of one is rejected at runtime inside the point, not at
    // config validation, so the sweep completes with a failed point
    std::fs::write(
        &config,
        format!("{CONFIG}\n[decomposition]\nensemble = 1\n"),
    )
    .unwrap();
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "partial failures exit 2");
    let text = read(&dir.join("out").join("simulate.csv"));
    assert!(text.contains("error:"), "failed point recorded in-row: {text}");
}

#[test]
fn validate_detects_perturbation_and_reports() {
    // library-level detector check plus the smallest end-to-end validate run
    assert!(corrgcv::validate::detector_flags_perturbation());
    let (dir, _config) = setup("validate");
    let output = bin()
        .args(["validate", "--level", "fast", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("[PASS]"), "{stdout}");
    assert!(stdout.contains("validate:"), "{stdout}");
    // the known finite-size gap of the strongly-correlated exponential closed
    // form is reported as a failing check, so the exit code is 1
    assert_eq!(output.status.code(), Some(1));
    let checks: serde_json::Value =
        serde_json::from_str(&read(&dir.join("out").join("validate.json"))).unwrap();
    assert!(checks.as_array().unwrap().len() > 10);
}

#[test]
fn workers_env_var_is_honored() {
    let (dir, config) = setup("workers");
    let status = bin()
        .args(["theory", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .env("CORRGCV_WORKERS", "1")
        .status()
        .unwrap();
    assert!(status.success());
}
