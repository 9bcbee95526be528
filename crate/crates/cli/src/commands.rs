//! Subcommand implementations. Each returns the rows/records it wrote so the
//! integration tests can assert on them directly.

use crate::config::{CliConfig, CommonOpts};
use crate::manifest::RunManifest;
use corrgcv::error::Error;
use corrgcv::estimators::{
    estimate_carmack, estimate_corrgcv, estimate_gcv1, estimate_gcv2_altman, EstimatorInputs,
};
use corrgcv::experiments::{generate_dataset, run_sweep_with, run_theory, write_rows_csv, SweepOutcome};
use corrgcv::kernel::CorrelationKernel;
use corrgcv::validate::{run_validation, CheckOutcome, ValidationLevel};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    ValidationFailure = 1,
    PartialFailure = 2,
}

fn ensure_dir(dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))
}

fn seed_set(config: &CliConfig) -> Vec<u64> {
    (0..config.seeds as u64).collect()
}

/// `theory`: omniscient curves over the grid; deterministic output.
pub fn cmd_theory(
    mut config: CliConfig,
    config_path: Option<&Path>,
    opts: &CommonOpts,
) -> Result<(SweepOutcome, PathBuf), String> {
    opts.apply_overrides(&mut config);
    let start = Instant::now();
    let out_dir = opts.out_dir(&config);
    ensure_dir(&out_dir)?;
    let exp = config.to_experiment_config();
    let outcome = run_theory(&exp).map_err(|e| format!("theory sweep failed: {e}"))?;
    let csv_path = out_dir.join("theory.csv");
    write_rows_csv(&csv_path, &outcome.rows).map_err(|e| e.to_string())?;
    RunManifest::new(
        "theory",
        config_path,
        &config,
        vec![csv_path.clone()],
        vec![config.master_seed],
        start.elapsed(),
    )
    .write(&out_dir)
    .map_err(|e| e.to_string())?;
    Ok((outcome, csv_path))
}

/// `simulate`: full Monte Carlo sweep; exit code 2 when some grid points fail.
///
/// Rows stream to the CSV as each grid point completes (full lines, flushed
/// per point), so an interrupted run leaves a valid partial table behind.
pub fn cmd_simulate(
    mut config: CliConfig,
    config_path: Option<&Path>,
    opts: &CommonOpts,
) -> Result<(SweepOutcome, PathBuf, ExitCode), String> {
    opts.apply_overrides(&mut config);
    let start = Instant::now();
    let out_dir = opts.out_dir(&config);
    ensure_dir(&out_dir)?;
    let exp = config.to_experiment_config();
    let csv_path = out_dir.join("simulate.csv");
    {
        let file = std::fs::File::create(&csv_path).map_err(|e| e.to_string())?;
        let writer = std::sync::Mutex::new(std::io::BufWriter::new(file));
        {
            use std::io::Write;
            let mut w = writer.lock().expect("csv writer");
            writeln!(w, "{}", corrgcv::experiments::CSV_HEADER).map_err(|e| e.to_string())?;
            w.flush().map_err(|e| e.to_string())?;
        }
        let outcome = run_sweep_with(&exp, |rows| {
            use std::io::Write;
            let mut w = writer.lock().expect("csv writer");
            for row in rows {
                let _ = writeln!(w, "{}", row.to_csv_line());
            }
            let _ = w.flush();
        })
        .map_err(|e| format!("simulation sweep failed: {e}"))?;
        RunManifest::new(
            "simulate",
            config_path,
            &config,
            vec![csv_path.clone()],
            seed_set(&config),
            start.elapsed(),
        )
        .write(&out_dir)
        .map_err(|e| e.to_string())?;
        let code = if outcome.failed_points > 0 { ExitCode::PartialFailure } else { ExitCode::Ok };
        return Ok((outcome, csv_path, code));
    }
}

/// All estimator outputs for one dataset, intermediates included.
#[derive(Debug, Serialize)]
pub struct EstimateRecord {
    pub n: usize,
    pub t: usize,
    pub q: f64,
    pub lambda: f64,
    pub r_in: f64,
    pub corrgcv: Option<corrgcv::estimators::CorrGcvEstimate>,
    pub gcv1: Option<f64>,
    pub gcv2_altman: Option<f64>,
    pub carmack: Option<f64>,
    pub errors: Vec<String>,
}

/// Load a dataset from CSV (`y` first column, features after; header optional).
pub fn load_dataset_csv(path: &Path) -> Result<(faer::Mat<f64>, Vec<f64>), String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue, // header
            Err(e) => return Err(format!("{}:{}: bad number: {e}", path.display(), i + 1)),
        }
    }
    if rows.len() < 2 {
        return Err(format!("dataset {} has T = {} < 2 rows", path.display(), rows.len()));
    }
    let width = rows[0].len();
    if width < 2 {
        return Err("dataset needs a label column plus at least one feature".into());
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err("ragged dataset rows".into());
    }
    let t = rows.len();
    let n = width - 1;
    let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let x = faer::Mat::from_fn(t, n, |i, j| rows[i][j + 1]);
    Ok((x, y))
}

/// `estimate`: run all configured estimators on one dataset (generated from the
/// config, or loaded from `data_path`).
pub fn cmd_estimate(
    mut config: CliConfig,
    config_path: Option<&Path>,
    opts: &CommonOpts,
    data_path: Option<&Path>,
) -> Result<(EstimateRecord, PathBuf), String> {
    opts.apply_overrides(&mut config);
    let start = Instant::now();
    let out_dir = opts.out_dir(&config);
    ensure_dir(&out_dir)?;
    let lambda = config
        .estimate
        .lambda
        .or_else(|| config.grid.lambda.first().copied())
        .ok_or("no lambda configured")?;
    let t_cfg = config.estimate.t.or_else(|| config.grid.t.first().copied()).ok_or("no t configured")?;

    let (x, y) = match data_path {
        Some(p) => load_dataset_csv(p)?,
        None => {
            let cov = config
                .covariance
                .build(config.master_seed)
                .map_err(|e| format!("covariance: {e}"))?;
            let exp = config.to_experiment_config();
            let d = generate_dataset(
                &cov,
                exp.kernel,
                exp.noise_kernel(),
                exp.sigma_eps,
                t_cfg,
                config.master_seed,
                0,
            )
            .map_err(|e| format!("dataset generation: {e}"))?;
            (d.x, d.y)
        }
    };
    let t = x.nrows();
    let n = x.ncols();

    // S_K provenance ladder for the estimator chain
    let exp = config.to_experiment_config();
    let s_kernel = match exp.s_kernel {
        corrgcv::experiments::SKernelProvenance::Analytic => {
            CorrelationKernel::stationary(exp.kernel, t)
                .and_then(|k| k.s_transform())
                .map_err(|e| format!("s_kernel: {e}"))?
        }
        corrgcv::experiments::SKernelProvenance::Stationary => {
            let k = CorrelationKernel::stationary(exp.kernel, t)
                .and_then(|k| k.build())
                .map_err(|e| format!("s_kernel: {e}"))?;
            corrgcv::stransform::s_empirical(k.eigenvalues().to_vec())
                .map_err(|e| format!("s_kernel: {e}"))?
        }
        corrgcv::experiments::SKernelProvenance::Gram => {
            let tf = t as f64;
            let mut g = &x * x.transpose();
            for j in 0..t {
                for i in 0..t {
                    g[(i, j)] /= tf;
                }
            }
            let eigs = g
                .self_adjoint_eigenvalues(faer::Side::Lower)
                .map_err(|_| "Gram eigendecomposition failed".to_string())?;
            let gram = corrgcv::stransform::s_from_gram(eigs, n as f64 / tf)
                .map_err(|e| format!("s_kernel: {e}"))?;
            let cap = 1.0f64.min(n as f64 / tf);
            let grid: Vec<f64> =
                (1..=40).map(|i| cap * (0.02 + 0.945 * i as f64 / 40.0)).collect();
            let samples: Result<Vec<(f64, f64)>, Error> =
                grid.iter().map(|&u| gram.value(u).map(|v| (u, v))).collect();
            corrgcv::stransform::interpolate_s(
                &samples.map_err(|e| format!("s_kernel: {e}"))?,
                exp.s_interpolation,
            )
            .map_err(|e| format!("s_kernel: {e}"))?
        }
    };

    let inputs = EstimatorInputs::from_data(x.as_ref(), &y, lambda, s_kernel)
        .map_err(|e| format!("estimator inputs: {e}"))?;
    let mut record = EstimateRecord {
        n,
        t,
        q: n as f64 / t as f64,
        lambda,
        r_in: inputs.r_in,
        corrgcv: None,
        gcv1: None,
        gcv2_altman: None,
        carmack: None,
        errors: Vec::new(),
    };
    for name in &exp.estimators {
        match name.as_str() {
            "corrgcv" => match estimate_corrgcv(&inputs) {
                Ok(v) => record.corrgcv = Some(v),
                Err(e) => record.errors.push(format!("corrgcv: {e}")),
            },
            "gcv1" => match estimate_gcv1(&inputs) {
                Ok(v) => record.gcv1 = Some(v),
                Err(e) => record.errors.push(format!("gcv1: {e}")),
            },
            "gcv2" => match estimate_gcv2_altman(&inputs) {
                Ok(v) => record.gcv2_altman = Some(v),
                Err(e) => record.errors.push(format!("gcv2: {e}")),
            },
            "carmack" => {
                let res = CorrelationKernel::stationary(exp.noise_kernel(), t)
                    .and_then(|k| k.build())
                    .and_then(|k| estimate_carmack(x.as_ref(), &y, lambda, &k));
                match res {
                    Ok(v) => record.carmack = Some(v),
                    Err(e) => record.errors.push(format!("carmack: {e}")),
                }
            }
            other => record.errors.push(format!("unknown estimator {other}")),
        }
    }
    let json_path = out_dir.join("estimate.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&record).expect("record serializes"))
        .map_err(|e| e.to_string())?;
    RunManifest::new(
        "estimate",
        config_path,
        &config,
        vec![json_path.clone()],
        vec![config.master_seed],
        start.elapsed(),
    )
    .write(&out_dir)
    .map_err(|e| e.to_string())?;
    Ok((record, json_path))
}

/// `validate`: run the invariant suites at the chosen scale; exit 1 on failure.
pub fn cmd_validate(
    level: ValidationLevel,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<(Vec<CheckOutcome>, ExitCode), String> {
    let checks = run_validation(level, seed).map_err(|e| format!("validation failed: {e}"))?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        let path = dir.join("validate.json");
        std::fs::write(&path, serde_json::to_string_pretty(&checks).expect("checks serialize"))
            .map_err(|e| e.to_string())?;
    }
    let code = if checks.iter().all(|c| c.pass) { ExitCode::Ok } else { ExitCode::ValidationFailure };
    Ok((checks, code))
}
