//! Data-driven risk estimators computed from `(X, y, lambda)` alone: the
//! CorrGCV estimation chain plus the GCV, Altman, and Carmack baselines.

use crate::dense::DenseSpd;
use crate::error::{Error, Result};
use crate::selfconsistent::{solve, SelfConsistentSolution, SolveInput, SolveMode};
use crate::stransform::STransform;
use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, MatRef, Side};

/// Ridge fit `(Sigma_hat + lambda)^{-1} X^T y / T` plus its train error.
#[derive(Debug, Clone)]
pub struct RidgeFit {
    pub w_hat: Vec<f64>,
    pub r_in: f64,
}

/// Fit ridge regression, choosing the primal (`N x N`) or dual (`T x T`)
/// normal system by whichever is smaller.
pub fn fit_ridge(x: MatRef<'_, f64>, y: &[f64], lambda: f64) -> Result<RidgeFit> {
    let t = x.nrows();
    let n = x.ncols();
    if y.len() != t {
        return Err(Error::DimensionMismatch(format!("y length {} vs T = {t}", y.len())));
    }
    let tf = t as f64;
    let yv = Mat::from_fn(t, 1, |i, _| y[i]);
    let w_hat: Vec<f64> = if n <= t {
        // primal: (X^T X / T + lambda) w = X^T y / T
        let mut a = x.transpose() * x;
        for j in 0..n {
            for i in 0..n {
                a[(i, j)] /= tf;
            }
            a[(j, j)] += lambda;
        }
        let rhs = x.transpose() * &yv;
        let llt = a
            .llt(Side::Lower)
            .map_err(|_| Error::SingularSystem("primal ridge system not positive definite".into()))?;
        let sol = llt.solve(rhs.as_ref());
        (0..n).map(|i| sol[(i, 0)] / tf).collect()
    } else {
        // dual: w = X^T (X X^T / T + lambda)^{-1} y / T
        let mut g = x * x.transpose();
        for j in 0..t {
            for i in 0..t {
                g[(i, j)] /= tf;
            }
            g[(j, j)] += lambda;
        }
        let llt = g
            .llt(Side::Lower)
            .map_err(|_| Error::SingularSystem("dual ridge system not positive definite".into()))?;
        let dual = llt.solve(yv.as_ref());
        let w = x.transpose() * &dual;
        (0..n).map(|i| w[(i, 0)] / tf).collect()
    };
    let mut r_in = 0.0;
    for i in 0..t {
        let mut pred = 0.0;
        for j in 0..n {
            pred += x[(i, j)] * w_hat[j];
        }
        r_in += (y[i] - pred).powi(2);
    }
    r_in /= tf;
    Ok(RidgeFit { w_hat, r_in })
}

/// Everything the spectral estimators need, extracted once from a dataset.
///
/// The shared nonzero eigenvalues of `Sigma_hat = X^T X / T` and
/// `K_hat = X X^T / T` are computed from whichever of the two is smaller; the
/// zero modes of the larger one are implicit in the `(n, t)` normalization.
pub struct EstimatorInputs {
    /// Nonzero shared eigenvalues of `Sigma_hat` / `K_hat` (at most `min(N, T)`).
    pub nonzero_spectrum: Vec<f64>,
    pub n: usize,
    pub t: usize,
    pub lambda: f64,
    /// Measured train error of the ridge fit at `lambda`.
    pub r_in: f64,
    pub s_kernel: STransform<f64>,
}

impl EstimatorInputs {
    pub fn from_data(
        x: MatRef<'_, f64>,
        y: &[f64],
        lambda: f64,
        s_kernel: STransform<f64>,
    ) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::EstimatorDomain("estimators require lambda > 0".into()));
        }
        let fit = fit_ridge(x, y, lambda)?;
        Ok(Self::from_fit(x, fit.r_in, lambda, s_kernel))
    }

    pub fn from_fit(
        x: MatRef<'_, f64>,
        r_in: f64,
        lambda: f64,
        s_kernel: STransform<f64>,
    ) -> Self {
        let t = x.nrows();
        let n = x.ncols();
        let tf = t as f64;
        let small = if n <= t {
            let mut a = x.transpose() * x;
            for j in 0..n {
                for i in 0..n {
                    a[(i, j)] /= tf;
                }
            }
            a
        } else {
            let mut g = x * x.transpose();
            for j in 0..t {
                for i in 0..t {
                    g[(i, j)] /= tf;
                }
            }
            g
        };
        let eigs = small
            .self_adjoint_eigenvalues(Side::Lower)
            .expect("covariance eigendecomposition");
        let top = eigs.iter().cloned().fold(0f64, f64::max);
        let nonzero_spectrum: Vec<f64> =
            eigs.into_iter().filter(|&l| l > 1e-12 * top.max(1e-300)).collect();
        Self { nonzero_spectrum, n, t, lambda, r_in, s_kernel }
    }

    pub fn q(&self) -> f64 {
        self.n as f64 / self.t as f64
    }

    /// `df1` of `Sigma_hat` at an arbitrary ridge (zero modes included via the
    /// `1/N` normalization).
    pub fn df1_sigma_hat(&self, lambda: f64) -> f64 {
        self.nonzero_spectrum.iter().map(|&l| l / (l + lambda)).sum::<f64>() / self.n as f64
    }

    /// `df2` of `Sigma_hat` at an arbitrary ridge.
    pub fn df2_sigma_hat(&self, lambda: f64) -> f64 {
        self.nonzero_spectrum.iter().map(|&l| (l / (l + lambda)).powi(2)).sum::<f64>()
            / self.n as f64
    }

    /// `df1` of `K_hat`; equals `q * df1_sigma_hat` identically.
    pub fn df1_k_hat(&self, lambda: f64) -> f64 {
        self.nonzero_spectrum.iter().map(|&l| l / (l + lambda)).sum::<f64>() / self.t as f64
    }

    /// Zero-padded `Sigma_hat` spectrum of full length `N`, as consumed by the
    /// empirical-mode solver.
    pub fn sigma_hat_spectrum(&self) -> Vec<f64> {
        let mut s = self.nonzero_spectrum.clone();
        s.resize(self.n, 0.0);
        s
    }

    /// Run the shared solver in empirical mode on this dataset's spectrum.
    pub fn solve_chain(&self) -> Result<SelfConsistentSolution<f64>> {
        let spectrum = self.sigma_hat_spectrum();
        solve(&SolveInput {
            spectrum: &spectrum,
            s_kernel: &self.s_kernel,
            q: self.q(),
            lambda: self.lambda,
            mode: SolveMode::Empirical,
        })
    }
}

/// CorrGCV estimate with all chain intermediates exposed.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CorrGcvEstimate {
    pub r_out: f64,
    pub factor: f64,
    pub df1: f64,
    pub df2: f64,
    pub df_tilde_1: f64,
    pub df_tilde_2: f64,
    pub kappa: f64,
    pub kappa_tilde: f64,
    pub s: f64,
    pub dkappa_dlambda: f64,
    pub dkappa_tilde_dlambda: f64,
}

/// The CorrGCV estimation chain: `df1` from the data spectrum, `kappa` through
/// the kernel S-transform, `kappa_tilde` by duality, the second degrees of
/// freedom by differentiating the chain in `lambda`, and finally
/// `R_in * S * dt1 / (dt1 - dt2)`.
pub fn estimate_corrgcv(inputs: &EstimatorInputs) -> Result<CorrGcvEstimate> {
    let sol = inputs.solve_chain()?;
    let gap = sol.df_tilde_1 - sol.df_tilde_2;
    if gap <= 0.0 {
        return Err(Error::SingularFactor(format!(
            "estimated df_tilde_1 - df_tilde_2 = {gap} <= 0"
        )));
    }
    let factor = sol.s * sol.df_tilde_1 / gap;
    Ok(CorrGcvEstimate {
        r_out: inputs.r_in * factor,
        factor,
        df1: sol.df1,
        df2: sol.df2,
        df_tilde_1: sol.df_tilde_1,
        df_tilde_2: sol.df_tilde_2,
        kappa: sol.kappa,
        kappa_tilde: sol.kappa_tilde,
        s: sol.s,
        dkappa_dlambda: sol.dkappa_dlambda,
        dkappa_tilde_dlambda: sol.dkappa_tilde_dlambda,
    })
}

/// Classical GCV: `R_in / (1 - df1_Khat(lambda))^2`.
pub fn estimate_gcv1(inputs: &EstimatorInputs) -> Result<f64> {
    let d = 1.0 - inputs.df1_k_hat(inputs.lambda);
    if d <= 0.0 {
        return Err(Error::SingularFactor("df1_Khat(lambda) >= 1 in GCV".into()));
    }
    Ok(inputs.r_in / (d * d))
}

/// Correlated-noise GCV variant that reduces to `R_in * S^2` with `S` from the
/// empirical `kappa` chain.
pub fn estimate_gcv2_altman(inputs: &EstimatorInputs) -> Result<f64> {
    let sol = inputs.solve_chain()?;
    Ok(inputs.r_in * sol.s * sol.s)
}

/// Finite-size Carmack correction computed directly from the smoothing matrix
/// `H = K_hat (K_hat + lambda)^{-1}`:
/// `G = 1 / [1 - (1/T) Tr(2 H K' - H K' H)]^2`, noise kernel `K'` assumed known.
pub fn estimate_carmack(
    x: MatRef<'_, f64>,
    y: &[f64],
    lambda: f64,
    k_assumed: &DenseSpd,
) -> Result<f64> {
    let t = x.nrows();
    if k_assumed.order() != t {
        return Err(Error::DimensionMismatch("assumed noise kernel order".into()));
    }
    let fit = fit_ridge(x, y, lambda)?;
    let tf = t as f64;
    let mut g = x * x.transpose();
    for j in 0..t {
        for i in 0..t {
            g[(i, j)] /= tf;
        }
        g[(j, j)] += lambda;
    }
    let llt = g
        .llt(Side::Lower)
        .map_err(|_| Error::SingularSystem("Gram system not positive definite".into()))?;
    let inv = llt.inverse();
    // H = I - lambda (K_hat + lambda)^{-1}
    let h = Mat::from_fn(t, t, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - lambda * inv[(i, j)]
    });
    let hk = &h * k_assumed.mat();
    let mut tr_hk = 0.0;
    for i in 0..t {
        tr_hk += hk[(i, i)];
    }
    let hkh = &hk * &h;
    let mut tr_hkh = 0.0;
    for i in 0..t {
        tr_hkh += hkh[(i, i)];
    }
    let denom = 1.0 - (2.0 * tr_hk - tr_hkh) / tf;
    if denom <= 0.0 {
        return Err(Error::SingularFactor(format!("Carmack denominator {denom} <= 0")));
    }
    Ok(fit.r_in / (denom * denom))
}

/// Finite-size Altman factor from the smoothing-matrix trace,
/// `G = 1/[1 - (1/T) Tr(H K')]^2`; converges to `S^2` when `K' = K`.
pub fn estimate_altman_finite(
    x: MatRef<'_, f64>,
    y: &[f64],
    lambda: f64,
    k_assumed: &DenseSpd,
) -> Result<f64> {
    let t = x.nrows();
    if k_assumed.order() != t {
        return Err(Error::DimensionMismatch("assumed noise kernel order".into()));
    }
    let fit = fit_ridge(x, y, lambda)?;
    let tf = t as f64;
    let mut g = x * x.transpose();
    for j in 0..t {
        for i in 0..t {
            g[(i, j)] /= tf;
        }
        g[(j, j)] += lambda;
    }
    let llt = g
        .llt(Side::Lower)
        .map_err(|_| Error::SingularSystem("Gram system not positive definite".into()))?;
    let inv = llt.inverse();
    let h = Mat::from_fn(t, t, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - lambda * inv[(i, j)]
    });
    let hk = &h * k_assumed.mat();
    let mut tr_hk = 0.0;
    for i in 0..t {
        tr_hk += hk[(i, i)];
    }
    let denom = 1.0 - tr_hk / tf;
    if denom <= 0.0 {
        return Err(Error::SingularFactor(format!("Altman denominator {denom} <= 0")));
    }
    Ok(fit.r_in / (denom * denom))
}
