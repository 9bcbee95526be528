//! Empirical measurements against which the theory is validated.

use super::dataset::{Dataset, GeneratorContext};
use crate::covariance::SpectralCovariance;
use crate::dense::DenseSpd;
use crate::error::{Error, Result};
use crate::estimators::fit_ridge;
use crate::risk::CorrelatedTestSpec;
use crate::rng::{standard_normal_vec, stream_rng, Component};
use crate::selfconsistent::SelfConsistentSolution;
use faer::linalg::solvers::DenseSolveCore;
use faer::Side;
use serde::Serialize;

/// Empirical risks of one fitted dataset.
///
/// The out-of-sample risk is evaluated through the exact quadratic form
/// `(w - w_hat)^T Sigma (w - w_hat)` in the covariance eigenbasis — no test
/// sampling, so no extra variance source.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmpiricalRisks {
    pub r_in: f64,
    pub r_g: f64,
    pub r_out: f64,
}

pub fn empirical_risks(
    dataset: &Dataset,
    w_hat: &[f64],
    cov: &SpectralCovariance<f64>,
    sigma_eps_sq: f64,
) -> EmpiricalRisks {
    let t = dataset.t();
    let n = dataset.n();
    let mut r_in = 0.0;
    for i in 0..t {
        let mut pred = 0.0;
        for j in 0..n {
            pred += dataset.x[(i, j)] * w_hat[j];
        }
        r_in += (dataset.y[i] - pred).powi(2);
    }
    r_in /= t as f64;
    let r_g: f64 = cov
        .eigenvalues()
        .iter()
        .zip(cov.teacher().iter().zip(w_hat))
        .map(|(&l, (&w, &wh))| l * (w - wh).powi(2))
        .sum();
    EmpiricalRisks { r_in, r_g, r_out: r_g + sigma_eps_sq }
}

/// Ensembled fine-grained decomposition.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VarianceComponents {
    pub bias_sq: f64,
    pub var_x: f64,
    pub var_xeps: f64,
    pub total: f64,
    /// Jackknife standard errors, same order as the components.
    pub se_bias_sq: f64,
    pub se_var_x: f64,
    pub se_var_xeps: f64,
    pub se_total: f64,
}

/// Ensemble of `E` datasets, each fit twice (with and without the label noise):
///
/// * `Bias^2` — risk of the ensemble-averaged noiseless fit,
/// * `Var_X` — mean risk of the noiseless fits minus `Bias^2`,
/// * `Var_Xeps` — mean total risk minus the other two,
///
/// with the finite-ensemble correction: the risk of the averaged fit retains
/// `Var_X / E` of fluctuation, so the raw split is debiased by the usual
/// `E / (E - 1)` factor. Components still sum to the mean total risk exactly.
/// Standard errors are leave-one-out jackknife over the ensemble.
pub fn variance_decomposition(
    ctx: &mut GeneratorContext,
    t: usize,
    lambda: f64,
    ensemble: usize,
    master_seed: u64,
) -> Result<VarianceComponents> {
    if ensemble < 2 {
        return Err(Error::Config("variance decomposition needs an ensemble of >= 2".into()));
    }
    let cov = ctx.covariance().clone();
    let n = cov.dimension();
    let mut rg_noisy = Vec::with_capacity(ensemble);
    let mut rg_clean = Vec::with_capacity(ensemble);
    let mut w_clean_mean = vec![0.0; n];
    let mut w_clean_all: Vec<Vec<f64>> = Vec::with_capacity(ensemble);
    for e in 0..ensemble {
        let d = ctx.generate(t, master_seed, e as u64)?;
        let noisy = fit_ridge(d.x.as_ref(), &d.y, lambda)?;
        let clean = fit_ridge(d.x.as_ref(), &d.clean_labels(), lambda)?;
        rg_noisy.push(empirical_risks(&d, &noisy.w_hat, &cov, 0.0).r_g);
        rg_clean.push(empirical_risks(&d, &clean.w_hat, &cov, 0.0).r_g);
        for j in 0..n {
            w_clean_mean[j] += clean.w_hat[j];
        }
        w_clean_all.push(clean.w_hat);
    }
    let ef = ensemble as f64;
    for w in &mut w_clean_mean {
        *w /= ef;
    }
    let risk_of = |w_hat: &[f64]| -> f64 {
        cov.eigenvalues()
            .iter()
            .zip(cov.teacher().iter().zip(w_hat))
            .map(|(&l, (&w, &wh))| l * (w - wh).powi(2))
            .sum()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let split = |risk_of_mean: f64, mean_clean: f64, mean_noisy: f64, e: f64| {
        let var_x = (mean_clean - risk_of_mean) * e / (e - 1.0);
        let bias_sq = risk_of_mean - var_x / e;
        let var_xeps = mean_noisy - mean_clean;
        (bias_sq, var_x, var_xeps)
    };
    let (bias_sq, var_x, var_xeps) = split(risk_of(&w_clean_mean), mean(&rg_clean), mean(&rg_noisy), ef);
    let mean_noisy = mean(&rg_noisy);

    // jackknife over ensemble members
    let mut jk = vec![[0.0f64; 4]; ensemble];
    for drop in 0..ensemble {
        let mut w_mean = vec![0.0; n];
        let mut mc = 0.0;
        let mut mn = 0.0;
        for e in 0..ensemble {
            if e == drop {
                continue;
            }
            for j in 0..n {
                w_mean[j] += w_clean_all[e][j];
            }
            mc += rg_clean[e];
            mn += rg_noisy[e];
        }
        let m = (ensemble - 1) as f64;
        for w in &mut w_mean {
            *w /= m;
        }
        mc /= m;
        mn /= m;
        let (b, vx, vxe) = split(risk_of(&w_mean), mc, mn, m);
        jk[drop] = [b, vx, vxe, mn];
    }
    let jack_se = |idx: usize| -> f64 {
        let vals: Vec<f64> = jk.iter().map(|row| row[idx]).collect();
        let m = mean(&vals);
        let ss: f64 = vals.iter().map(|v| (v - m).powi(2)).sum();
        ((ef - 1.0) / ef * ss).sqrt()
    };

    Ok(VarianceComponents {
        bias_sq,
        var_x,
        var_xeps,
        total: mean_noisy,
        se_bias_sq: jack_se(0),
        se_var_x: jack_se(1),
        se_var_xeps: jack_se(2),
        se_total: jack_se(3),
    })
}

/// Monte Carlo risk on conditionally drawn correlated test points.
///
/// Test covariate: `x | X ~ N(X^T alpha, (1 - rho) Sigma)`; test noise:
/// `eps | eps_train ~ N(alpha^T eps_train, (1 - rho) sigma^2)`.
pub fn sample_correlated_test(
    dataset: &Dataset,
    spec: &CorrelatedTestSpec,
    cov: &SpectralCovariance<f64>,
    w_hat: &[f64],
    sigma_eps: f64,
    reps: usize,
) -> Result<f64> {
    if spec.rho >= 1.0 {
        return Err(Error::DegenerateTestPoint { rho: spec.rho });
    }
    let t = dataset.t();
    let n = dataset.n();
    if spec.alpha.len() != t {
        return Err(Error::DimensionMismatch("test spec length vs dataset T".into()));
    }
    // conditional means
    let mut mean_x = vec![0.0; n];
    for i in 0..t {
        let a = spec.alpha[i];
        for j in 0..n {
            mean_x[j] += a * dataset.x[(i, j)];
        }
    }
    let mean_eps: f64 = spec.alpha.iter().zip(&dataset.eps).map(|(a, e)| a * e).sum();
    let cond_sd = (1.0 - spec.rho).sqrt();
    let delta: Vec<f64> = dataset.w_bar.iter().zip(w_hat).map(|(w, wh)| w - wh).collect();
    let mean_err: f64 = mean_x.iter().zip(&delta).map(|(m, d)| m * d).sum();

    let mut rng = stream_rng(dataset.seed, dataset.stream, Component::TestPoint);
    let roots: Vec<f64> = cov.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let mut acc = 0.0;
    for _ in 0..reps {
        let g = standard_normal_vec(&mut rng, n);
        let mut fluct = 0.0;
        for j in 0..n {
            fluct += cond_sd * roots[j] * g[j] * delta[j];
        }
        let ge: f64 = standard_normal_vec(&mut rng, 1)[0];
        let eps_test = mean_eps + cond_sd * sigma_eps * ge;
        acc += (mean_err + fluct + eps_test).powi(2);
    }
    Ok(acc / reps as f64)
}

/// Residuals of the two-point deterministic-equivalence trace tests.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceTestReport {
    /// Resolvent sandwich: `(1/N) Tr[(Sh+l)^{-1} Sigma' (Sh+l)^{-1}]` against
    /// its deterministic value.
    pub resolvent_pair: f64,
    /// Sourced trace: `(1/T^2) Tr[Sigma' (Sh+l)^{-1} X^T K' X (Sh+l)^{-1}]`
    /// against `gamma_{SS'KK'} / (1 - gamma)`.
    pub sourced_pair: f64,
    pub mc_resolvent: f64,
    pub det_resolvent: f64,
    pub mc_sourced: f64,
    pub det_sourced: f64,
}

/// Monte Carlo average of both two-point traces over `seeds` datasets versus
/// their deterministic equivalents, for `Sigma' = Sigma` expressed in the
/// training eigenbasis and explicit dense kernels.
pub fn trace_test_two_point(
    ctx: &mut GeneratorContext,
    sol: &SelfConsistentSolution<f64>,
    k_dense: &DenseSpd,
    k_prime_dense: &DenseSpd,
    lambda: f64,
    seeds: u32,
    master_seed: u64,
) -> Result<TraceTestReport> {
    let cov = ctx.covariance().clone();
    let n = cov.dimension();
    let t = k_dense.order();
    let nf = n as f64;
    let tf = t as f64;

    let mut mc_res = 0.0;
    let mut mc_src = 0.0;
    for s in 0..seeds {
        let d = ctx.generate(t, master_seed, s as u64)?;
        // resolvent of Sigma_hat at lambda
        let mut sh = d.x.transpose() * &d.x;
        for j in 0..n {
            for i in 0..n {
                sh[(i, j)] /= tf;
            }
            sh[(j, j)] += lambda;
        }
        let llt = sh
            .llt(Side::Lower)
            .map_err(|_| Error::SingularSystem("resolvent Cholesky".into()))?;
        let a = llt.inverse();
        // Sigma' = Sigma is diagonal in this basis
        let mut tr1 = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr1 += a[(i, j)] * cov.eigenvalues()[j] * a[(j, i)];
            }
        }
        mc_res += tr1 / nf;

        // M = X A  (T x N); trace Sigma' A X^T K' X A = Tr[(M^T K' M) Sigma']
        let m = &d.x * &a;
        let kpm = k_prime_dense.mat() * &m;
        let mut tr2 = 0.0;
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..t {
                acc += m[(i, j)] * kpm[(i, j)];
            }
            tr2 += acc * cov.eigenvalues()[j];
        }
        mc_src += tr2 / (tf * tf);
    }
    mc_res /= seeds as f64;
    mc_src /= seeds as f64;

    // deterministic sides
    let kappa = sol.kappa;
    let s2 = sol.s * sol.s;
    let mut det_res = 0.0;
    let mut df2_ss = 0.0;
    let mut quad_tr = 0.0;
    for &l in cov.eigenvalues() {
        let den = l + kappa;
        det_res += l / (den * den);
        df2_ss += l * l / (den * den);
        quad_tr += l / (den * den);
    }
    det_res = s2 * det_res / nf;
    df2_ss /= nf;
    quad_tr /= nf;
    let gamma = sol.gamma;
    let gamma_ss = df2_ss * sol.df_tilde_2 / (sol.df1 * sol.df_tilde_1);
    det_res += s2 * quad_tr * gamma_ss / (1.0 - gamma);

    // df2_{KK'} over the dense pair at kappa_tilde
    let mu = k_dense.eigenvalues();
    let diag = k_dense.diag_in_eigenbasis(k_prime_dense)?;
    let kt = sol.kappa_tilde;
    let mut df2_kk = 0.0;
    for (&m, &dg) in mu.iter().zip(&diag) {
        let den = m + kt;
        df2_kk += m * dg / (den * den);
    }
    df2_kk /= tf;
    let det_src = df2_ss * df2_kk / (sol.df1 * sol.df_tilde_1) / (1.0 - gamma);

    Ok(TraceTestReport {
        resolvent_pair: ((mc_res - det_res) / det_res).abs(),
        sourced_pair: ((mc_src - det_src) / det_src).abs(),
        mc_resolvent: mc_res,
        det_resolvent: det_res,
        mc_sourced: mc_src,
        det_sourced: det_src,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;

    #[test]
    fn exact_teacher_recovery_zeroes_risk() {
        let cov = SpectralCovariance::power_law(1.1, 0.9, 10).unwrap();
        let ctx = &mut GeneratorContext::new(
            cov.clone(),
            KernelFamily::Identity,
            KernelFamily::Identity,
            0.0,
        );
        let d = ctx.generate(25, 9, 0).unwrap();
        let risks = empirical_risks(&d, &d.w_bar.clone(), &cov, 0.0);
        assert!(risks.r_g < 1e-28);
        assert!(risks.r_in < 1e-28);
    }

    #[test]
    fn zero_fit_risk_is_teacher_quadratic() {
        let cov = SpectralCovariance::power_law(1.4, 0.5, 16).unwrap();
        let ctx = &mut GeneratorContext::new(
            cov.clone(),
            KernelFamily::Identity,
            KernelFamily::Identity,
            0.0,
        );
        let d = ctx.generate(12, 2, 0).unwrap();
        let zeros = vec![0.0; 16];
        let risks = empirical_risks(&d, &zeros, &cov, 0.0);
        let expect: f64 = cov
            .eigenvalues()
            .iter()
            .zip(cov.teacher())
            .map(|(&l, &w)| l * w * w)
            .sum();
        assert!((risks.r_g - expect).abs() < 1e-14);
    }

    #[test]
    fn decomposition_sums_exactly_and_noiseless_kills_var_xeps() {
        let cov = SpectralCovariance::<f64>::isotropic(20);
        let mut ctx = GeneratorContext::new(
            cov,
            KernelFamily::Exponential { xi: 5.0 },
            KernelFamily::Exponential { xi: 5.0 },
            0.0,
        );
        let c = variance_decomposition(&mut ctx, 40, 0.1, 6, 11).unwrap();
        assert!((c.bias_sq + c.var_x + c.var_xeps - c.total).abs() <= 1e-12 * c.total.max(1e-12));
        assert!(c.var_xeps.abs() < 1e-12, "sigma = 0 leaves no noise variance");
    }

    #[test]
    fn correlated_test_with_zero_k_matches_unconditional() {
        let n = 12usize;
        let t = 60usize;
        let cov = SpectralCovariance::<f64>::isotropic(n);
        let fam = KernelFamily::Exponential { xi: 8.0 };
        let mut ctx = GeneratorContext::new(cov.clone(), fam, fam, 0.4);
        let d = ctx.generate(t, 21, 0).unwrap();
        let fit = fit_ridge(d.x.as_ref(), &d.y, 0.2).unwrap();
        let kmat = ctx.kernel_matrix(t).unwrap();
        let spec = CorrelatedTestSpec::from_vector(&kmat, vec![0.0; t], None).unwrap();
        let mc = sample_correlated_test(&d, &spec, &cov, &fit.w_hat, 0.4, 40_000).unwrap();
        let exact = empirical_risks(&d, &fit.w_hat, &cov, 0.16).r_out;
        // k = 0: the conditional draw is the unconditional one
        assert!((mc - exact).abs() / exact < 0.05, "{mc} vs {exact}");
    }
}
