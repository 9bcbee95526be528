//! Grid sweep driver: one theory row, estimator rows, and empirical rows per
//! grid point, written to a fixed-schema CSV.

use super::config::{ExperimentConfig, SKernelProvenance};
use super::dataset::GeneratorContext;
use super::measure::{empirical_risks, variance_decomposition};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_carmack, estimate_corrgcv, estimate_gcv1, estimate_gcv2_altman, EstimatorInputs,
};
use crate::kernel::CorrelationKernel;
use crate::risk::{risk_matched, risk_ood, CorrelatedTestSpec, KernelPair, SigmaPrime};
use crate::selfconsistent::{solve, SolveInput, SolveMode};
use crate::stransform::{interpolate_s, s_from_gram, STransform};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

pub const CSV_HEADER: &str =
    "family,kernel_params,n,t,q,lambda,sigma_eps,tau,source,value,stderr,status";

/// One output row of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub family: String,
    pub kernel_params: String,
    pub n: usize,
    pub t: usize,
    pub q: f64,
    pub lambda: f64,
    pub sigma_eps: f64,
    pub tau: Option<usize>,
    pub source: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub status: String,
}

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        let tau = self.tau.map(|t| t.to_string()).unwrap_or_default();
        let se = self.stderr.map(|s| format!("{s}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.family,
            self.kernel_params,
            self.n,
            self.t,
            self.q,
            self.lambda,
            self.sigma_eps,
            tau,
            self.source,
            self.value,
            se,
            self.status
        )
    }
}

/// Sweep result: rows plus a count of failed grid points (failures are rows
/// with `status = error:...`, not aborts).
#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failed_points: usize,
    pub total_points: usize,
}

fn emit(
    rows: &mut Vec<SweepRow>,
    template: &SweepRow,
    source: &str,
    value: f64,
    stderr: Option<f64>,
    tau: Option<usize>,
) {
    let mut r = template.clone();
    r.source = source.into();
    r.value = value;
    r.stderr = stderr;
    r.tau = tau;
    if !value.is_finite() {
        r.status = "divergent".into();
    }
    rows.push(r);
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct PointOutput {
    rows: Vec<SweepRow>,
    failed: bool,
}

/// Theory-only sweep: deterministic rows, no sampling.
pub fn run_theory(config: &ExperimentConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let cov = config.covariance.build(config.master_seed)?;
    let mut grid: Vec<(usize, f64)> = Vec::new();
    for &t in &config.t_grid {
        for &lambda in &config.lambda_grid {
            grid.push((t, lambda));
        }
    }
    let outputs: Vec<PointOutput> = grid
        .par_iter()
        .map(|&(t, lambda)| match theory_point(config, &cov, t, lambda) {
            Ok(rows) => PointOutput { rows, failed: false },
            Err(e) => {
                let mut row = base_row(config, cov.dimension(), t, lambda);
                row.source = "point".into();
                row.status = format!("error:{e}").replace(',', ";");
                PointOutput { rows: vec![row], failed: true }
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut failed = 0usize;
    for out in outputs {
        if out.failed {
            failed += 1;
        }
        rows.extend(out.rows);
    }
    Ok(SweepOutcome { rows, failed_points: failed, total_points: grid.len() })
}

fn theory_point(
    config: &ExperimentConfig,
    cov: &crate::covariance::SpectralCovariance<f64>,
    t: usize,
    lambda: f64,
) -> Result<Vec<SweepRow>> {
    let n = cov.dimension();
    let q = n as f64 / t as f64;
    let sigma_eps_sq = config.sigma_eps * config.sigma_eps;
    let matched = config.is_matched();
    let s_kernel = CorrelationKernel::stationary(config.kernel, t.max(512))?.s_transform()?;
    let template = base_row(config, n, t, lambda);
    let mut rows = Vec::new();
    let sol = solve(&SolveInput {
        spectrum: cov.eigenvalues(),
        s_kernel: &s_kernel,
        q,
        lambda,
        mode: SolveMode::Omniscient,
    })?;
    let theory = if matched {
        risk_matched(&sol, cov, sigma_eps_sq)
    } else {
        let k_dense = CorrelationKernel::stationary(config.kernel, t)?.build()?;
        let kp_dense = CorrelationKernel::stationary(config.noise_kernel(), t)?.build()?;
        risk_ood(
            &sol,
            cov,
            &SigmaPrime::Same,
            &KernelPair { k: Some(&k_dense), k_prime: Some(&kp_dense) },
            sigma_eps_sq,
        )?
        .0
    };
    emit(&mut rows, &template, "theory", theory.r_out, None, None);
    emit(&mut rows, &template, "theory_r_g", theory.r_g, None, None);
    emit(&mut rows, &template, "theory_r_in", theory.r_in, None, None);
    emit(&mut rows, &template, "theory_bias2", theory.bias_sq, None, None);
    emit(&mut rows, &template, "theory_var_x", theory.var_x, None, None);
    emit(&mut rows, &template, "theory_var_xeps", theory.var_xeps, None, None);
    if !config.tau_grid.is_empty() && matched {
        let kmat = CorrelationKernel::stationary(config.kernel, t)?.build()?;
        for &tau in &config.tau_grid {
            let spec = CorrelatedTestSpec::from_horizon(config.kernel, &kmat, tau)?;
            let th = crate::risk::risk_correlated_test(&sol, &kmat, &spec, &theory)?;
            emit(&mut rows, &template, "theory_corr_test", th.report.r_out, None, Some(tau));
        }
    }
    Ok(rows)
}

/// Run the full sweep. Grid points execute in parallel; each point owns its
/// datasets and the rows are assembled in grid order at the end.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    run_sweep_with(config, |_| {})
}

/// Like [`run_sweep`], additionally streaming each grid point's rows (in grid
/// order) to `sink` as soon as they are available, so callers can keep a valid
/// partial CSV on disk throughout the run.
pub fn run_sweep_with(
    config: &ExperimentConfig,
    sink: impl Fn(&[SweepRow]) + Sync,
) -> Result<SweepOutcome> {
    config.validate()?;
    let cov = config.covariance.build(config.master_seed)?;

    let mut grid: Vec<(usize, f64)> = Vec::new();
    for &t in &config.t_grid {
        for &lambda in &config.lambda_grid {
            grid.push((t, lambda));
        }
    }

    // single ordered writer: completed points park in the slot map until all
    // earlier points have been emitted
    struct Funnel<'a, F: Fn(&[SweepRow])> {
        pending: std::collections::BTreeMap<usize, PointOutput>,
        next: usize,
        done: Vec<PointOutput>,
        sink: &'a F,
    }
    impl<F: Fn(&[SweepRow])> Funnel<'_, F> {
        fn push(&mut self, idx: usize, out: PointOutput) {
            self.pending.insert(idx, out);
            while let Some(out) = self.pending.remove(&self.next) {
                (self.sink)(&out.rows);
                self.done.push(out);
                self.next += 1;
            }
        }
    }
    let funnel = std::sync::Mutex::new(Funnel {
        pending: Default::default(),
        next: 0,
        done: Vec::with_capacity(grid.len()),
        sink: &sink,
    });

    grid.par_iter().enumerate().for_each(|(idx, &(t, lambda))| {
        let out = run_point(config, &cov, t, lambda);
        funnel.lock().expect("funnel lock").push(idx, out);
    });

    let funnel = funnel.into_inner().expect("funnel lock");
    assert_eq!(funnel.done.len(), grid.len());
    let mut rows = Vec::new();
    let mut failed = 0usize;
    for out in funnel.done {
        if out.failed {
            failed += 1;
        }
        rows.extend(out.rows);
    }
    Ok(SweepOutcome { rows, failed_points: failed, total_points: grid.len() })
}

fn base_row(config: &ExperimentConfig, cov_n: usize, t: usize, lambda: f64) -> SweepRow {
    SweepRow {
        family: config.covariance.label(),
        kernel_params: if config.is_matched() {
            config.kernel.label()
        } else {
            format!("{}|noise:{}", config.kernel.label(), config.noise_kernel().label())
        },
        n: cov_n,
        t,
        q: cov_n as f64 / t as f64,
        lambda,
        sigma_eps: config.sigma_eps,
        tau: None,
        source: String::new(),
        value: f64::NAN,
        stderr: None,
        status: "ok".into(),
    }
}

fn run_point(
    config: &ExperimentConfig,
    cov: &crate::covariance::SpectralCovariance<f64>,
    t: usize,
    lambda: f64,
) -> PointOutput {
    match run_point_inner(config, cov, t, lambda) {
        Ok(rows) => PointOutput { rows, failed: false },
        Err(e) => {
            let mut row = base_row(config, cov.dimension(), t, lambda);
            row.source = "point".into();
            row.status = format!("error:{e}").replace(',', ";");
            PointOutput { rows: vec![row], failed: true }
        }
    }
}

fn run_point_inner(
    config: &ExperimentConfig,
    cov: &crate::covariance::SpectralCovariance<f64>,
    t: usize,
    lambda: f64,
) -> Result<Vec<SweepRow>> {
    let n = cov.dimension();
    let q = n as f64 / t as f64;
    let sigma_eps_sq = config.sigma_eps * config.sigma_eps;
    let matched = config.is_matched();
    let s_kernel_theory = CorrelationKernel::stationary(config.kernel, t.max(512))?.s_transform()?;

    let template = base_row(config, n, t, lambda);
    let mut rows: Vec<SweepRow> = Vec::new();

    // ---- theory ----
    let sol = solve(&SolveInput {
        spectrum: cov.eigenvalues(),
        s_kernel: &s_kernel_theory,
        q,
        lambda,
        mode: SolveMode::Omniscient,
    })?;
    let theory = if matched {
        risk_matched(&sol, cov, sigma_eps_sq)
    } else {
        let k_dense = CorrelationKernel::stationary(config.kernel, t)?.build()?;
        let kp_dense = CorrelationKernel::stationary(config.noise_kernel(), t)?.build()?;
        risk_ood(
            &sol,
            cov,
            &SigmaPrime::Same,
            &KernelPair { k: Some(&k_dense), k_prime: Some(&kp_dense) },
            sigma_eps_sq,
        )?
        .0
    };
    emit(&mut rows, &template, "theory", theory.r_out, None, None);
    emit(&mut rows, &template, "theory_r_g", theory.r_g, None, None);
    emit(&mut rows, &template, "theory_r_in", theory.r_in, None, None);
    emit(&mut rows, &template, "theory_bias2", theory.bias_sq, None, None);
    emit(&mut rows, &template, "theory_var_x", theory.var_x, None, None);
    emit(&mut rows, &template, "theory_var_xeps", theory.var_xeps, None, None);

    // ---- Monte Carlo + estimators ----
    let mut ctx = GeneratorContext::new(
        cov.clone(),
        config.kernel,
        config.noise_kernel(),
        config.sigma_eps,
    );
    let seeds = config.seeds as usize;
    let mut emp_out = Vec::with_capacity(seeds);
    let mut emp_in = Vec::with_capacity(seeds);
    let mut est_vals: std::collections::HashMap<&str, Vec<f64>> = Default::default();
    let k_dense_for_carmack = if config.estimators.iter().any(|e| e == "carmack") {
        Some(CorrelationKernel::stationary(config.noise_kernel(), t)?.build()?)
    } else {
        None
    };
    for s in 0..seeds {
        let d = ctx.generate(t, config.master_seed, s as u64)?;
        let fit = crate::estimators::fit_ridge(d.x.as_ref(), &d.y, lambda)?;
        let risks = empirical_risks(&d, &fit.w_hat, cov, sigma_eps_sq);
        emp_out.push(risks.r_out);
        emp_in.push(risks.r_in);

        let s_kernel_est = estimator_s_kernel(config, &d.x, t)?;
        let inputs = EstimatorInputs::from_fit(d.x.as_ref(), fit.r_in, lambda, s_kernel_est);
        for name in &config.estimators {
            let value = match name.as_str() {
                "corrgcv" => estimate_corrgcv(&inputs).map(|c| c.r_out),
                "gcv1" => estimate_gcv1(&inputs),
                "gcv2" => estimate_gcv2_altman(&inputs),
                "carmack" => estimate_carmack(
                    d.x.as_ref(),
                    &d.y,
                    lambda,
                    k_dense_for_carmack.as_ref().expect("carmack kernel built"),
                ),
                other => Err(Error::Config(format!("unknown estimator {other}"))),
            };
            match value {
                Ok(v) => est_vals.entry(estimator_key(name)).or_default().push(v),
                Err(e) => {
                    let mut r = template.clone();
                    r.source = estimator_key(name).into();
                    r.status = format!("error:{e}").replace(',', ";");
                    rows.push(r);
                }
            }
        }
    }
    let (m, se) = mean_se(&emp_out);
    emit(&mut rows, &template, "empirical", m, Some(se), None);
    let (m_in, se_in) = mean_se(&emp_in);
    emit(&mut rows, &template, "empirical_r_in", m_in, Some(se_in), None);
    for name in &config.estimators {
        if let Some(vals) = est_vals.get(estimator_key(name)) {
            let (m, se) = mean_se(vals);
            emit(&mut rows, &template, estimator_key(name), m, Some(se), None);
        }
    }

    // ---- bias-variance decomposition ----
    if config.decomposition_ensemble >= 1 {
        let c = variance_decomposition(
            &mut ctx,
            t,
            lambda,
            config.decomposition_ensemble,
            config.master_seed,
        )?;
        emit(&mut rows, &template, "bias2", c.bias_sq, Some(c.se_bias_sq), None);
        emit(&mut rows, &template, "var_x", c.var_x, Some(c.se_var_x), None);
        emit(&mut rows, &template, "var_xeps", c.var_xeps, Some(c.se_var_xeps), None);
    }

    // ---- correlated test points ----
    if !config.tau_grid.is_empty() && matched {
        let kmat = ctx.kernel_matrix(t)?;
        let base = risk_matched(&sol, cov, sigma_eps_sq);
        for &tau in &config.tau_grid {
            let spec = CorrelatedTestSpec::from_horizon(config.kernel, &kmat, tau)?;
            let th = crate::risk::risk_correlated_test(&sol, &kmat, &spec, &base)?;
            emit(&mut rows, &template, "theory_corr_test", th.report.r_out, None, Some(tau));
            let mut vals = Vec::with_capacity(seeds);
            for s in 0..seeds {
                let d = ctx.generate(t, config.master_seed, s as u64)?;
                let fit = crate::estimators::fit_ridge(d.x.as_ref(), &d.y, lambda)?;
                let mc = crate::experiments::measure::sample_correlated_test(
                    &d,
                    &spec,
                    cov,
                    &fit.w_hat,
                    config.sigma_eps,
                    2000,
                )?;
                vals.push(mc);
            }
            let (m, se) = mean_se(&vals);
            emit(&mut rows, &template, "empirical_corr_test", m, Some(se), Some(tau));
        }
    }

    Ok(rows)
}

fn estimator_key(name: &str) -> &'static str {
    match name {
        "corrgcv" => "corrgcv",
        "gcv1" => "gcv1",
        "gcv2" => "gcv2",
        "carmack" => "carmack",
        _ => "unknown",
    }
}

/// The S-transform handed to the estimators, per the configured provenance
/// ladder: analytic family, stationary-kernel empirical, or Gram-recovered
/// plus polynomial interpolation.
fn estimator_s_kernel(
    config: &ExperimentConfig,
    x: &faer::Mat<f64>,
    t: usize,
) -> Result<STransform<f64>> {
    match config.s_kernel {
        SKernelProvenance::Analytic => {
            CorrelationKernel::stationary(config.kernel, t)?.s_transform()
        }
        SKernelProvenance::Stationary => {
            let k = CorrelationKernel::stationary(config.kernel, t)?.build()?;
            crate::stransform::s_empirical(k.eigenvalues().to_vec())
        }
        SKernelProvenance::Gram => {
            let tf = t as f64;
            let n = x.ncols();
            let q = n as f64 / tf;
            let mut g = x * x.transpose();
            for j in 0..t {
                for i in 0..t {
                    g[(i, j)] /= tf;
                }
            }
            let eigs = g
                .self_adjoint_eigenvalues(faer::Side::Lower)
                .map_err(|_| Error::SingularSystem("Gram eigendecomposition".into()))?;
            let gram = s_from_gram(eigs, q)?;
            let cap = 1.0f64.min(q);
            let grid: Vec<f64> = (1..=40).map(|i| cap * (0.02 + 0.945 * i as f64 / 40.0)).collect();
            let mut samples = Vec::with_capacity(grid.len());
            for &u in &grid {
                samples.push((u, gram.value(u)?));
            }
            interpolate_s(&samples, config.s_interpolation)
        }
    }
}

/// Write rows (with header) to a CSV file, one atomic line per row.
pub fn write_rows_csv(path: &std::path::Path, rows: &[SweepRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(f, "{}", row.to_csv_line())?;
    }
    f.flush()?;
    Ok(())
}
