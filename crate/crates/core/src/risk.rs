//! Omniscient asymptotic risk formulas: matched and mismatched (OOD) risks,
//! train errors, the bias-variance split, GCV-style correction factors,
//! correlated-test-point scaling, and power-law rate predictions.

use crate::covariance::{df2_cross, SpectralCovariance};
use crate::dense::DenseSpd;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::selfconsistent::{solve, SelfConsistentSolution, SolveInput, SolveMode};
use crate::stransform::{s_identity, STransform};
use serde::Serialize;

/// Risk decomposition for one configuration.
///
/// `r_g = bias_sq + var_x + var_xeps` and `r_out = r_g + sigma_eps_sq`, both
/// exactly by construction. Divergent regimes (`gamma >= 1`) are reported as
/// infinities with the flag set rather than as errors, so sweeps can mark the
/// interpolation peak and continue.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RiskReport<R> {
    pub bias_sq: R,
    pub var_x: R,
    pub var_xeps: R,
    pub r_g: R,
    pub r_out: R,
    pub r_in: R,
    pub sigma_eps_sq: R,
    pub divergent: bool,
}

impl<R: Real> RiskReport<R> {
    fn divergent(sigma_eps_sq: R) -> Self {
        let inf = R::infinity();
        RiskReport {
            bias_sq: inf,
            var_x: inf,
            var_xeps: inf,
            r_g: inf,
            r_out: inf,
            r_in: inf,
            sigma_eps_sq,
            divergent: true,
        }
    }
}

/// Teacher-weighted quadratic `w^T Sigma (Sigma + kappa)^{-2} w` in the
/// eigenbasis.
fn quad2<R: Real>(cov: &SpectralCovariance<R>, kappa: R) -> R {
    cov.teacher_quadratic(|l| l / ((l + kappa) * (l + kappa)))
}

/// Matched-correlation generalization and train error (`K' = K`, `Sigma' = Sigma`).
///
/// `R_g = kappa^2/(1-gamma) w^T Sigma (Sigma+kappa)^{-2} w + gamma/(1-gamma) sigma^2`
/// with `gamma = (df2/df1)(df_tilde_2/df_tilde_1)`, split into bias and
/// variance components; the train error carries the extra factor
/// `(df_tilde_1 - df_tilde_2) / (S df_tilde_1)`.
pub fn risk_matched<R: Real>(
    sol: &SelfConsistentSolution<R>,
    cov: &SpectralCovariance<R>,
    sigma_eps_sq: R,
) -> RiskReport<R> {
    let one = R::one();
    if sol.is_divergent() {
        return RiskReport::divergent(sigma_eps_sq);
    }
    let gamma = sol.gamma;
    let q2 = quad2(cov, sol.kappa);
    let bias_sq = sol.kappa * sol.kappa * q2;
    let var_x = bias_sq * gamma / (one - gamma);
    let var_xeps = gamma / (one - gamma) * sigma_eps_sq;
    let r_g = bias_sq + var_x + var_xeps;
    let r_out = r_g + sigma_eps_sq;
    // (dt1 - dt2)/(S dt1) * [ kappa^2 quad + sigma^2 ] / (1 - gamma)
    let pref = (sol.df_tilde_1 - sol.df_tilde_2) / (sol.s * sol.df_tilde_1);
    let r_in = pref * (bias_sq + sigma_eps_sq) / (one - gamma);
    RiskReport { bias_sq, var_x, var_xeps, r_g, r_out, r_in, sigma_eps_sq, divergent: false }
}

/// Uncorrelated-sample specialization (`K = I`), written in its classical form
/// with `gamma = q df2`; agrees with [`risk_matched`] on identity-kernel
/// solutions and serves as the second route of that reduction check.
pub fn risk_uncorrelated<R: Real>(
    sol: &SelfConsistentSolution<R>,
    cov: &SpectralCovariance<R>,
    sigma_eps_sq: R,
) -> RiskReport<R> {
    let one = R::one();
    let gamma = sol.q * sol.df2;
    if !(gamma < one) {
        return RiskReport::divergent(sigma_eps_sq);
    }
    let q2 = quad2(cov, sol.kappa);
    let bias_sq = sol.kappa * sol.kappa * q2;
    let var_x = bias_sq * gamma / (one - gamma);
    let var_xeps = gamma / (one - gamma) * sigma_eps_sq;
    let r_g = bias_sq + var_x + var_xeps;
    let lam_over_kappa = one / sol.s;
    let r_in = lam_over_kappa * lam_over_kappa * (bias_sq + sigma_eps_sq) / (one - gamma);
    RiskReport {
        bias_sq,
        var_x,
        var_xeps,
        r_g,
        r_out: r_g + sigma_eps_sq,
        r_in,
        sigma_eps_sq,
        divergent: false,
    }
}

/// The multiplicative factor turning matched train error into out-of-sample
/// risk: `S df_tilde_1 / (df_tilde_1 - df_tilde_2)`.
pub fn corrgcv_factor<R: Real>(sol: &SelfConsistentSolution<R>) -> Result<R> {
    let gap = sol.df_tilde_1 - sol.df_tilde_2;
    if gap <= R::zero() {
        return Err(Error::SingularFactor(format!(
            "df_tilde_1 - df_tilde_2 = {gap} <= 0 (degenerate kernel)"
        )));
    }
    Ok(sol.s * sol.df_tilde_1 / gap)
}

/// Asymptotic multiplicative factors of the four estimators.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimatorFactors<R> {
    /// Classical GCV: `1 / (1 - df_tilde_1)^2`.
    pub gcv1: R,
    /// Correlated-noise correction that reduces to `S^2`.
    pub gcv2_altman: R,
    /// `(1 - gamma)^2 * corrgcv^2`.
    pub carmack: R,
    /// The exact factor `S df_tilde_1 / (df_tilde_1 - df_tilde_2)`.
    pub corrgcv: R,
}

pub fn estimator_asymptotics<R: Real>(
    sol: &SelfConsistentSolution<R>,
) -> Result<EstimatorFactors<R>> {
    let one = R::one();
    let corrgcv = corrgcv_factor(sol)?;
    let d = one - sol.df_tilde_1;
    if d <= R::zero() {
        return Err(Error::SingularFactor("df_tilde_1 >= 1 in GCV factor".into()));
    }
    let gcv1 = one / (d * d);
    let gcv2_altman = sol.s * sol.s;
    let carmack = (one - sol.gamma) * (one - sol.gamma) * corrgcv * corrgcv;
    Ok(EstimatorFactors { gcv1, gcv2_altman, carmack, corrgcv })
}

/// Test-distribution covariance for the OOD risk: either co-diagonal with the
/// training covariance (a spectrum in the same eigenbasis) or a dense matrix
/// expressed in that eigenbasis.
pub enum SigmaPrime<'a> {
    Same,
    /// Spectrum of `Sigma'` along the training eigenbasis.
    Spectrum(&'a [f64]),
    /// Dense `Sigma'` in the training eigenbasis.
    Dense(&'a DenseSpd),
}

impl SigmaPrime<'_> {
    /// Diagonal entries in the training eigenbasis.
    fn diagonal(&self, cov: &SpectralCovariance<f64>) -> Result<Vec<f64>> {
        match self {
            SigmaPrime::Same => Ok(cov.eigenvalues().to_vec()),
            SigmaPrime::Spectrum(s) => {
                if s.len() != cov.dimension() {
                    return Err(Error::DimensionMismatch("Sigma' spectrum length".into()));
                }
                Ok(s.to_vec())
            }
            SigmaPrime::Dense(m) => {
                if m.order() != cov.dimension() {
                    return Err(Error::DimensionMismatch("Sigma' order".into()));
                }
                Ok((0..m.order()).map(|i| m.mat()[(i, i)]).collect())
            }
        }
    }

    /// `v^T Sigma' v` for a vector in the training eigenbasis.
    fn quadratic(&self, cov: &SpectralCovariance<f64>, v: &[f64]) -> Result<f64> {
        match self {
            SigmaPrime::Same => Ok(cov.eigenvalues().iter().zip(v).map(|(&l, &x)| l * x * x).sum()),
            SigmaPrime::Spectrum(s) => {
                if s.len() != v.len() {
                    return Err(Error::DimensionMismatch("Sigma' spectrum length".into()));
                }
                Ok(s.iter().zip(v).map(|(&l, &x)| l * x * x).sum())
            }
            SigmaPrime::Dense(m) => {
                if m.order() != v.len() {
                    return Err(Error::DimensionMismatch("Sigma' order".into()));
                }
                let n = v.len();
                let mut acc = 0.0;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += m.mat()[(i, j)] * v[j];
                    }
                    acc += v[i] * row;
                }
                Ok(acc)
            }
        }
    }
}

/// Cross traces and loop weights entering the mismatched risk.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OodQuantities {
    /// `(1/N) Tr[Sigma Sigma' (Sigma + kappa)^{-2}]`
    pub df2_sigma_sigma_prime: f64,
    /// `(1/T) Tr[K K' (K + kappa_tilde)^{-2}]`
    pub df2_k_k_prime: f64,
    pub gamma_sigma_sigma_prime: f64,
    pub gamma_sigma_sigma_prime_k_k_prime: f64,
}

/// Kernel-side inputs for the mismatched formulas: training kernel `K` and
/// noise kernel `K'`, both dense.
///
/// `k_prime: None` means matched noise (`K' = K`), in which case no dense
/// matrices are needed: the required traces reduce to quantities already held
/// by the solution.
pub struct KernelPair<'a> {
    pub k: Option<&'a DenseSpd>,
    pub k_prime: Option<&'a DenseSpd>,
}

impl KernelPair<'_> {
    pub const MATCHED: KernelPair<'static> = KernelPair { k: None, k_prime: None };

    /// `(1/T) Tr[K K'(K + kt)^{-2}]` and `(1/T) Tr[K'(K + kt)^{-1}]`.
    fn traces(&self, sol: &SelfConsistentSolution<f64>) -> Result<(f64, f64)> {
        match self.k_prime {
            None => Ok((sol.df_tilde_2, sol.df_tilde_1)),
            Some(kp) => {
                let k = self.k.ok_or_else(|| {
                    Error::Config("mismatched noise requires the dense training kernel".into())
                })?;
                if k.order() != kp.order() {
                    return Err(Error::DimensionMismatch("K and K' orders differ".into()));
                }
                let mu = k.eigenvalues();
                let diag = k.diag_in_eigenbasis(kp)?;
                let kt = sol.kappa_tilde;
                let t = mu.len() as f64;
                let mut df2_cross_val = 0.0;
                let mut tr_res = 0.0;
                for (&m, &d) in mu.iter().zip(&diag) {
                    let den = m + kt;
                    df2_cross_val += m * d / (den * den);
                    tr_res += d / den;
                }
                Ok((df2_cross_val / t, tr_res / t))
            }
        }
    }
}

/// Out-of-distribution risk: test covariance `Sigma'`, noise correlation `K'`.
///
/// Three-term split `Bias^2 + Var_X + Var_Xeps`; reduces to [`risk_matched`]
/// when `Sigma' = Sigma` and `K' = K`, and to the known covariate-shift
/// asymptotics when additionally `K = I`.
pub fn risk_ood(
    sol: &SelfConsistentSolution<f64>,
    cov: &SpectralCovariance<f64>,
    sigma_prime: &SigmaPrime<'_>,
    kernels: &KernelPair<'_>,
    sigma_eps_sq: f64,
) -> Result<(RiskReport<f64>, OodQuantities)> {
    let kappa = sol.kappa;
    let gamma = sol.gamma;

    let diag_prime = sigma_prime.diagonal(cov)?;
    let df2_ss = df2_cross(cov.eigenvalues(), &diag_prime, kappa)?;
    let (df2_kk, _) = kernels.traces(sol)?;

    let gamma_ss = df2_ss * sol.df_tilde_2 / (sol.df1 * sol.df_tilde_1);
    let gamma_sskk = df2_ss * df2_kk / (sol.df1 * sol.df_tilde_1);

    let quantities = OodQuantities {
        df2_sigma_sigma_prime: df2_ss,
        df2_k_k_prime: df2_kk,
        gamma_sigma_sigma_prime: gamma_ss,
        gamma_sigma_sigma_prime_k_k_prime: gamma_sskk,
    };

    if !(gamma < 1.0) {
        return Ok((RiskReport::divergent(sigma_eps_sq), quantities));
    }

    // Bias^2 = kappa^2 w^T (Sigma+kappa)^{-1} Sigma' (Sigma+kappa)^{-1} w
    let v: Vec<f64> = cov
        .eigenvalues()
        .iter()
        .zip(cov.teacher())
        .map(|(&l, &w)| w / (l + kappa))
        .collect();
    let bias_sq = kappa * kappa * sigma_prime.quadratic(cov, &v)?;
    let var_x = kappa * kappa * gamma_ss / (1.0 - gamma) * quad2(cov, kappa);
    let var_xeps = gamma_sskk / (1.0 - gamma) * sigma_eps_sq;
    let r_g = bias_sq + var_x + var_xeps;
    let r_in = train_error_mismatched(sol, cov, kernels, sigma_eps_sq)?;
    let report = RiskReport {
        bias_sq,
        var_x,
        var_xeps,
        r_g,
        r_out: r_g + sigma_eps_sq,
        r_in,
        sigma_eps_sq,
        divergent: false,
    };
    Ok((report, quantities))
}

/// Train error under mismatched noise correlations:
///
/// ```text
/// R_in = (dt1 - dt2)/(S dt1) kappa^2/(1-gamma) w^T Sigma (Sigma+kappa)^{-2} w
///      + sigma^2 kt [ (1/T) Tr K'(K+kt)^{-1} - (df1-df2)/df1 * df2_{KK'} / (1-gamma) ]
/// ```
///
/// Collapses to the matched train error when `K' = K`.
pub fn train_error_mismatched(
    sol: &SelfConsistentSolution<f64>,
    cov: &SpectralCovariance<f64>,
    kernels: &KernelPair<'_>,
    sigma_eps_sq: f64,
) -> Result<f64> {
    if sol.is_divergent() {
        return Ok(f64::INFINITY);
    }
    let gamma = sol.gamma;
    let signal = (sol.df_tilde_1 - sol.df_tilde_2) / (sol.s * sol.df_tilde_1)
        * sol.kappa
        * sol.kappa
        / (1.0 - gamma)
        * quad2(cov, sol.kappa);
    let (df2_kk, tr_kp_res) = kernels.traces(sol)?;
    let noise = sigma_eps_sq
        * sol.kappa_tilde
        * (tr_kp_res - (sol.df1 - sol.df2) / sol.df1 * df2_kk / (1.0 - gamma));
    Ok(signal + noise)
}

/// Correlated-test-point specification: correlations `k_t` between the test
/// point and each training sample, with derived `alpha = K^{-1} k` and
/// `rho = k^T K^{-1} k`.
#[derive(Debug, Clone)]
pub struct CorrelatedTestSpec {
    pub k: Vec<f64>,
    pub alpha: Vec<f64>,
    pub rho: f64,
    /// Horizon used to build `k` for stationary kernels, when applicable.
    pub tau: Option<usize>,
}

impl CorrelatedTestSpec {
    /// Build from an explicit correlation vector.
    pub fn from_vector(kernel_matrix: &DenseSpd, k: Vec<f64>, tau: Option<usize>) -> Result<Self> {
        if k.len() != kernel_matrix.order() {
            return Err(Error::DimensionMismatch("test correlation vector length".into()));
        }
        let alpha = kernel_matrix.solve_shifted(&k, 0.0)?;
        let rho: f64 = k.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        if rho >= 1.0 {
            return Err(Error::DegenerateTestPoint { rho });
        }
        Ok(Self { k, alpha, rho, tau })
    }

    /// Stationary construction: the test point sits `tau >= 1` steps past the
    /// training window, so `k_t = a(T + tau - t)` for autocorrelation `a`.
    pub fn from_horizon(
        family: crate::kernel::KernelFamily,
        kernel_matrix: &DenseSpd,
        tau: usize,
    ) -> Result<Self> {
        if tau == 0 {
            return Err(Error::Domain("horizon tau must be >= 1".into()));
        }
        let t = kernel_matrix.order();
        let k: Vec<f64> = (1..=t).map(|s| family.autocorrelation(t + tau - s)).collect();
        Self::from_vector(kernel_matrix, k, Some(tau))
    }
}

/// Correlated-test-point risk: the base (uncorrelated-test) report scaled by
/// the bracket `1 - rho + kt^2 alpha^T K (K + kt)^{-2} alpha in (1 - rho, 1]`.
/// The train error is unchanged.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelatedTestReport {
    pub report: RiskReport<f64>,
    /// The exact scaling bracket.
    pub bracket: f64,
    /// The cheap `(1 - rho)` approximation of the out-of-sample risk.
    pub r_out_one_minus_rho: f64,
}

pub fn risk_correlated_test(
    sol: &SelfConsistentSolution<f64>,
    kernel_matrix: &DenseSpd,
    spec: &CorrelatedTestSpec,
    base: &RiskReport<f64>,
) -> Result<CorrelatedTestReport> {
    if spec.rho >= 1.0 {
        return Err(Error::DegenerateTestPoint { rho: spec.rho });
    }
    let kt = sol.kappa_tilde;
    let (mu, u) = kernel_matrix.eigen();
    let t = kernel_matrix.order();
    let mut term = 0.0;
    for col in 0..t {
        let mut proj = 0.0;
        for i in 0..t {
            proj += u[(i, col)] * spec.alpha[i];
        }
        let den = mu[col] + kt;
        term += proj * proj * mu[col] / (den * den);
    }
    let bracket = 1.0 - spec.rho + kt * kt * term;
    let scale = |x: f64| x * bracket;
    let report = RiskReport {
        bias_sq: scale(base.bias_sq),
        var_x: scale(base.var_x),
        var_xeps: scale(base.var_xeps),
        r_g: scale(base.r_g),
        r_out: scale(base.r_out),
        r_in: base.r_in,
        sigma_eps_sq: scale(base.sigma_eps_sq),
        divergent: base.divergent,
    };
    Ok(CorrelatedTestReport {
        report,
        bracket,
        r_out_one_minus_rho: (1.0 - spec.rho) * base.r_out,
    })
}

/// Predicted log-log decay exponent of the out-of-sample risk under power-law
/// spectra: `-2 min(alpha, ell) min(r, 1)` for ridge decay `lambda ~ T^-ell`
/// (`ell = infinity` encodes the ridgeless limit).
pub fn scaling_prediction<R: Real>(alpha: R, r: R, ell: R) -> R {
    -R::of(2.0) * alpha.min(ell) * r.min(R::one())
}

/// One row of the double-descent comparison table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DoubleDescentRow {
    pub q: f64,
    pub kappa_corr: f64,
    pub kappa_uncorr: f64,
    pub gamma_corr: f64,
    pub gamma_uncorr: f64,
    pub r_g_matched: f64,
    /// Correlated covariates, identity noise correlations.
    pub r_g_mismatched: f64,
}

/// Sweep `q` through the interpolation threshold comparing correlated and
/// uncorrelated solves at fixed ridge, including the `K' = I` mismatched risk.
pub fn double_descent_diagnostics(
    cov: &SpectralCovariance<f64>,
    s_kernel: &STransform<f64>,
    kernel_at: impl Fn(usize) -> Result<DenseSpd>,
    lambda: f64,
    sigma_eps_sq: f64,
    q_grid: &[f64],
) -> Result<Vec<DoubleDescentRow>> {
    let n = cov.dimension();
    let identity = s_identity::<f64>();
    let mut rows = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        let corr = solve(&SolveInput {
            spectrum: cov.eigenvalues(),
            s_kernel,
            q,
            lambda,
            mode: SolveMode::Omniscient,
        })?;
        let uncorr = solve(&SolveInput {
            spectrum: cov.eigenvalues(),
            s_kernel: &identity,
            q,
            lambda,
            mode: SolveMode::Omniscient,
        })?;
        let matched = risk_matched(&corr, cov, sigma_eps_sq);
        let t = (n as f64 / q).round().max(1.0) as usize;
        let k_dense = kernel_at(t)?;
        let kp = DenseSpd::identity(t);
        let (mis, _) = risk_ood(
            &corr,
            cov,
            &SigmaPrime::Same,
            &KernelPair { k: Some(&k_dense), k_prime: Some(&kp) },
            sigma_eps_sq,
        )?;
        rows.push(DoubleDescentRow {
            q,
            kappa_corr: corr.kappa,
            kappa_uncorr: uncorr.kappa,
            gamma_corr: corr.gamma,
            gamma_uncorr: uncorr.gamma,
            r_g_matched: matched.r_g,
            r_g_mismatched: mis.r_g,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{CorrelationKernel, KernelFamily};
    use crate::stransform::s_exponential;

    fn solve_with(
        spec: &[f64],
        sk: &STransform<f64>,
        q: f64,
        lambda: f64,
    ) -> SelfConsistentSolution<f64> {
        solve(&SolveInput { spectrum: spec, s_kernel: sk, q, lambda, mode: SolveMode::Omniscient })
            .unwrap()
    }

    #[test]
    fn decomposition_closure_and_gcv_identity() {
        let cov = SpectralCovariance::power_law(1.3, 0.7, 200).unwrap();
        let sk = s_exponential(20.0f64).unwrap();
        for (q, lam, se2) in [(0.5, 0.1, 1.0), (2.0, 1e-3, 0.25), (1.0, 0.5, 0.0)] {
            let sol = solve_with(cov.eigenvalues(), &sk, q, lam);
            let rep = risk_matched(&sol, &cov, se2);
            assert!(
                (rep.bias_sq + rep.var_x + rep.var_xeps - rep.r_g).abs() <= 1e-12 * rep.r_g,
                "closure at q={q}"
            );
            assert!((rep.r_out - rep.r_g - se2).abs() <= 1e-12 * rep.r_out);
            let f = corrgcv_factor(&sol).unwrap();
            assert!(
                (f * rep.r_in - rep.r_out).abs() <= 1e-10 * rep.r_out,
                "corrgcv closure at q={q}: {} vs {}",
                f * rep.r_in,
                rep.r_out
            );
        }
    }

    #[test]
    fn uncorrelated_gcv_closure() {
        // R_out * (lambda/kappa)^2 = R_in on identity-kernel instances
        let cov = SpectralCovariance::<f64>::isotropic(100);
        let id = s_identity::<f64>();
        let sol = solve_with(cov.eigenvalues(), &id, 0.5, 1.0);
        let rep = risk_uncorrelated(&sol, &cov, 1.0);
        let ratio = rep.r_out / (sol.s * sol.s);
        assert!((ratio - rep.r_in).abs() <= 1e-12 * rep.r_in);
        // perfect recovery: sigma = 0, q < 1, lambda -> 0
        let sol0 = solve_with(cov.eigenvalues(), &id, 0.5, 1e-13);
        let rep0 = risk_uncorrelated(&sol0, &cov, 0.0);
        assert!(rep0.r_g < 1e-10, "{}", rep0.r_g);
    }

    #[test]
    fn reduction_lattice() {
        // risk_ood(Sigma, Sigma, K, K) == risk_matched == risk_uncorrelated (K = I)
        let cov = SpectralCovariance::power_law(1.1, 1.0, 150).unwrap();
        let id = s_identity::<f64>();
        let sol = solve_with(cov.eigenvalues(), &id, 0.75, 0.3);
        let matched = risk_matched(&sol, &cov, 0.8);
        let uncorr = risk_uncorrelated(&sol, &cov, 0.8);
        let (ood, _) =
            risk_ood(&sol, &cov, &SigmaPrime::Same, &KernelPair::MATCHED, 0.8).unwrap();
        for (a, b) in [
            (matched.r_g, uncorr.r_g),
            (matched.r_in, uncorr.r_in),
            (matched.r_g, ood.r_g),
            (matched.r_in, ood.r_in),
            (matched.bias_sq, ood.bias_sq),
            (matched.var_x, ood.var_x),
            (matched.var_xeps, ood.var_xeps),
        ] {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{a} vs {b}");
        }
    }

    fn s_empirical_of(k: &DenseSpd) -> STransform<f64> {
        crate::stransform::s_empirical(k.eigenvalues().to_vec()).unwrap()
    }

    #[test]
    fn matched_reduction_with_dense_kernels() {
        // with the kernel's own empirical S-transform, the dense-trace route is
        // exact and must reproduce the trace-free matched path
        let t = 128usize;
        let xi = 25.0;
        let kmat = CorrelationKernel::stationary(KernelFamily::Exponential { xi }, t)
            .unwrap()
            .build()
            .unwrap();
        let cov = SpectralCovariance::<f64>::isotropic(64);
        let sk = s_empirical_of(&kmat);
        let sol = solve_with(cov.eigenvalues(), &sk, 64.0 / t as f64, 0.05);
        let matched = risk_matched(&sol, &cov, 0.5);
        let (ood, _) = risk_ood(
            &sol,
            &cov,
            &SigmaPrime::Same,
            &KernelPair { k: Some(&kmat), k_prime: Some(&kmat) },
            0.5,
        )
        .unwrap();
        assert!(
            (ood.r_g - matched.r_g).abs() <= 1e-10 * matched.r_g,
            "{} vs {}",
            ood.r_g,
            matched.r_g
        );
        assert!((ood.r_in - matched.r_in).abs() <= 1e-10 * matched.r_in);
    }

    #[test]
    fn ood_linearity_in_sigma_prime() {
        let cov = SpectralCovariance::power_law(1.4, 0.6, 120).unwrap();
        let sk = s_exponential(40.0f64).unwrap();
        let sol = solve_with(cov.eigenvalues(), &sk, 1.5, 0.2);
        let doubled: Vec<f64> = cov.eigenvalues().iter().map(|l| 2.0 * l).collect();
        let (base, _) =
            risk_ood(&sol, &cov, &SigmaPrime::Same, &KernelPair::MATCHED, 0.0).unwrap();
        let (twice, _) =
            risk_ood(&sol, &cov, &SigmaPrime::Spectrum(&doubled), &KernelPair::MATCHED, 0.0)
                .unwrap();
        assert!((twice.bias_sq - 2.0 * base.bias_sq).abs() <= 1e-12 * twice.bias_sq);
        assert!((twice.var_x - 2.0 * base.var_x).abs() <= 1e-12 * twice.var_x);
    }

    #[test]
    fn mismatched_train_error_collapses_when_matched() {
        let t = 96usize;
        let xi = 12.0;
        let kmat = CorrelationKernel::stationary(KernelFamily::Exponential { xi }, t)
            .unwrap()
            .build()
            .unwrap();
        let cov = SpectralCovariance::<f64>::isotropic(48);
        let sk = s_empirical_of(&kmat);
        let sol = solve_with(cov.eigenvalues(), &sk, 0.5, 0.1);
        let matched = risk_matched(&sol, &cov, 0.7);
        let rin_dense = train_error_mismatched(
            &sol,
            &cov,
            &KernelPair { k: Some(&kmat), k_prime: Some(&kmat) },
            0.7,
        )
        .unwrap();
        assert!(
            (rin_dense - matched.r_in).abs() <= 1e-10 * matched.r_in,
            "{rin_dense} vs {}",
            matched.r_in
        );
        // sigma = 0 leaves the signal term only
        let rin_sig =
            train_error_mismatched(&sol, &cov, &KernelPair::MATCHED, 0.0).unwrap();
        let matched0 = risk_matched(&sol, &cov, 0.0);
        assert!((rin_sig - matched0.r_in).abs() <= 1e-12 * matched0.r_in);
    }

    #[test]
    fn mismatch_bound() {
        // df2_{K, K'=I}(kt) <= (tr K^{-1}/T) df_tilde_2(kt), equality at kt = 0
        let t = 200usize;
        let kmat = CorrelationKernel::stationary(KernelFamily::Exponential { xi: 30.0 }, t)
            .unwrap()
            .build()
            .unwrap();
        let tr_kinv = kmat.trace_inverse().unwrap() / t as f64;
        let mu = kmat.eigenvalues().to_vec();
        let identity_spec = vec![1.0; t];
        for kt in [0.0, 0.05, 0.5, 2.0] {
            let lhs = df2_cross(&mu, &identity_spec, kt).unwrap();
            let rhs = tr_kinv * crate::covariance::df2(&mu, kt).unwrap();
            assert!(lhs <= rhs + 1e-12, "kt={kt}: {lhs} vs {rhs}");
            if kt == 0.0 {
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ridgeless_mismatched_noise_ratio() {
        // overparameterized ridgeless, K' = I: noise term = matched x (tr K^{-1}/T)
        let t = 150usize;
        let n = 300usize;
        let xi = 100.0;
        let kmat = CorrelationKernel::stationary(KernelFamily::Exponential { xi }, t)
            .unwrap()
            .build()
            .unwrap();
        let cov = SpectralCovariance::<f64>::isotropic(n);
        let sk = s_empirical_of(&kmat);
        let sol = solve_with(cov.eigenvalues(), &sk, n as f64 / t as f64, 0.0);
        let se2 = 1.0;
        let matched = risk_matched(&sol, &cov, se2);
        let kp = DenseSpd::identity(t);
        let (mis, _) = risk_ood(
            &sol,
            &cov,
            &SigmaPrime::Same,
            &KernelPair { k: Some(&kmat), k_prime: Some(&kp) },
            se2,
        )
        .unwrap();
        let ratio = kmat.trace_inverse().unwrap() / t as f64;
        assert!(ratio > 1.0);
        let expect = matched.var_xeps * ratio;
        assert!(
            (mis.var_xeps - expect).abs() <= 1e-6 * expect,
            "{} vs {expect}",
            mis.var_xeps
        );
    }

    #[test]
    fn estimator_factor_reductions() {
        // K = I: gcv1 = gcv2 = corrgcv = S^2; Carmack consistency holds always
        let cov = SpectralCovariance::<f64>::isotropic(80);
        let id = s_identity::<f64>();
        let sol = solve_with(cov.eigenvalues(), &id, 0.5, 1.0);
        let f = estimator_asymptotics(&sol).unwrap();
        let s2 = sol.s * sol.s;
        assert!((f.gcv1 - s2).abs() <= 1e-12 * s2);
        assert!((f.gcv2_altman - s2).abs() <= 1e-12 * s2);
        assert!((f.corrgcv - s2).abs() <= 1e-12 * s2);
        let carm = (1.0 - sol.gamma).powi(2) * f.corrgcv.powi(2);
        assert!((f.carmack - carm).abs() <= 1e-12 * carm);

        // strong correlations order the estimators: gcv1 < corrgcv < gcv2
        let sk = s_exponential(100.0f64).unwrap();
        let sol = solve_with(cov.eigenvalues(), &sk, 0.25, 1e-3);
        let f = estimator_asymptotics(&sol).unwrap();
        assert!(f.gcv1 < f.corrgcv && f.corrgcv < f.gcv2_altman, "{f:?}");

        // lambda -> infinity: no fitting, every factor -> 1
        let sol = solve_with(cov.eigenvalues(), &sk, 0.5, 1e9);
        let f = estimator_asymptotics(&sol).unwrap();
        assert!((f.corrgcv - 1.0).abs() < 1e-6);
        assert!((f.gcv1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn correlated_test_bracket_bounds() {
        let t = 160usize;
        let xi = 100.0;
        let fam = KernelFamily::Exponential { xi };
        let kmat = CorrelationKernel::stationary(fam, t).unwrap().build().unwrap();
        let cov = SpectralCovariance::<f64>::isotropic(80);
        let sk = s_exponential(xi).unwrap();
        let sol = solve_with(cov.eigenvalues(), &sk, 0.5, 1e-2);
        let base = risk_matched(&sol, &cov, 0.25);
        for tau in [1usize, 3, 10, 40] {
            let spec = CorrelatedTestSpec::from_horizon(fam, &kmat, tau).unwrap();
            let out = risk_correlated_test(&sol, &kmat, &spec, &base).unwrap();
            assert!(out.bracket > 1.0 - spec.rho && out.bracket <= 1.0 + 1e-12, "tau={tau}");
            assert!(out.report.r_out <= base.r_out, "suppression at tau={tau}");
            assert!(out.report.r_in == base.r_in, "train error unchanged");
        }
        // k = 0 leaves the base report untouched
        let zero = CorrelatedTestSpec::from_vector(&kmat, vec![0.0; t], None).unwrap();
        let out = risk_correlated_test(&sol, &kmat, &zero, &base).unwrap();
        assert!((out.report.r_out - base.r_out).abs() <= 1e-14 * base.r_out);
        assert!((out.bracket - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scaling_prediction_values() {
        assert!((scaling_prediction(1.8f64, 1.0, f64::INFINITY) + 3.6).abs() < 1e-15);
        assert!((scaling_prediction(1.0f64, 2.0, f64::INFINITY) + 2.0).abs() < 1e-15);
        assert!((scaling_prediction(1.0f64, 0.5, 0.4) + 0.4).abs() < 1e-15);
    }

    #[test]
    fn double_descent_mollification() {
        let cov = SpectralCovariance::<f64>::isotropic(100);
        let xi = 100.0;
        let sk = s_exponential(xi).unwrap();
        let q_grid: Vec<f64> = (1..=15).map(|i| 0.4 + 0.08 * i as f64).collect();
        let rows = double_descent_diagnostics(
            &cov,
            &sk,
            |t| CorrelationKernel::stationary(KernelFamily::Exponential { xi }, t)?.build(),
            0.1,
            1.0,
            &q_grid,
        )
        .unwrap();
        for row in &rows {
            assert!(row.kappa_corr >= row.kappa_uncorr * (1.0 - 1e-12), "q={}", row.q);
            if (row.q - 1.0).abs() < 0.3 {
                assert!(row.gamma_corr <= row.gamma_uncorr + 1e-12, "q={}", row.q);
            }
        }
        // identity kernel: correlated and uncorrelated columns coincide
        let id_rows = double_descent_diagnostics(
            &cov,
            &s_identity::<f64>(),
            |t| Ok(DenseSpd::identity(t)),
            0.1,
            1.0,
            &[0.5, 1.0, 2.0],
        )
        .unwrap();
        for row in &id_rows {
            assert!((row.kappa_corr - row.kappa_uncorr).abs() <= 1e-10 * row.kappa_corr);
            if row.r_g_matched.is_finite() {
                assert!((row.r_g_matched - row.r_g_mismatched).abs() <= 1e-6 * row.r_g_matched);
            }
        }
    }
}
