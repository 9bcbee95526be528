//! Fixed-point solvers for the renormalized ridges.
//!
//! For a feature spectrum and a kernel S-transform `S_K`, the feature-side
//! renormalized ridge solves
//!
//! ```text
//! kappa = lambda * S_K(q df1(kappa)) / (1 - q df1(kappa)),   df1 = df1_Sigma(kappa)
//! ```
//!
//! after which everything else is closed-form: `df_tilde_1 = q df1`, the dual
//! ridge `kappa_tilde = lambda / (kappa q df1)`, the second degrees of freedom,
//! `gamma`, and the lambda-derivatives of both ridges.

use crate::covariance::{df1, df2};
use crate::error::{Error, Result};
use crate::numeric::{bisect_decreasing_log, bisect_increasing, richardson_diff};
use crate::real::Real;
use crate::stransform::STransform;
use serde::Serialize;

/// Relative tolerance demanded of the fixed point.
const FIXED_POINT_TOL: f64 = 1e-12;
/// Ridges below `RIDGELESS_FACTOR * mean(spectrum)` use the pole-equation branch.
const RIDGELESS_FACTOR: f64 = 1e-12;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// `df1` is the population functional evaluated self-consistently at `kappa`.
    Omniscient,
    /// `df1` is read off the (empirical) spectrum at the explicit ridge, and the
    /// second degrees of freedom come from the finite-difference estimation
    /// chain rather than population functionals.
    Empirical,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveInput<'a, R> {
    pub spectrum: &'a [R],
    pub s_kernel: &'a STransform<R>,
    /// Overparameterization ratio `q = N / T`.
    pub q: R,
    pub lambda: R,
    pub mode: SolveMode,
}

/// Solved fixed point with every downstream quantity the risk formulas need.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SelfConsistentSolution<R> {
    pub kappa: R,
    pub kappa_tilde: R,
    /// `S = kappa / lambda`.
    pub s: R,
    /// `S_tilde = kappa_tilde / lambda`.
    pub s_tilde: R,
    pub df1: R,
    pub df2: R,
    pub df_tilde_1: R,
    pub df_tilde_2: R,
    /// `gamma = (df2/df1) * (df_tilde_2/df_tilde_1)`.
    pub gamma: R,
    pub dkappa_dlambda: R,
    pub dkappa_tilde_dlambda: R,
    pub lambda: R,
    pub q: R,
    pub converged: bool,
    pub iterations: usize,
}

impl<R: Real> SelfConsistentSolution<R> {
    /// `gamma`, guaranteed in `[0, 1)` for non-degenerate solves.
    pub fn gamma(&self) -> R {
        self.gamma
    }

    pub fn is_divergent(&self) -> bool {
        !(self.gamma < R::one())
    }

    pub fn dkappa_dlambda(&self) -> Result<R> {
        if self.is_divergent() {
            return Err(Error::SingularDerivative);
        }
        Ok(self.dkappa_dlambda)
    }

    pub fn dkappa_tilde_dlambda(&self) -> Result<R> {
        if self.is_divergent() {
            return Err(Error::SingularDerivative);
        }
        Ok(self.dkappa_tilde_dlambda)
    }

    /// Serialize to the flat JSON record used by the CLI.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution serializes")
    }
}

/// `kappa -> lambda * S_K(q df1(kappa)) / (1 - q df1(kappa))`, the self-map of
/// the fixed point. Decreasing in `kappa`.
fn picard_map<R: Real>(input: &SolveInput<'_, R>, kappa: R) -> Result<R> {
    let u = input.q * df1(input.spectrum, kappa)?;
    if u >= R::one() {
        return Err(Error::Pole(format!("q df1 = {u} >= 1 inside fixed-point map")));
    }
    Ok(input.lambda * input.s_kernel.value(u)? / (R::one() - u))
}

/// Unique `kappa > 0` with `q df1(kappa) = 1`; only defined for `q > 1`.
pub fn ridgeless_kappa<R: Real>(spectrum: &[R], q: R) -> Result<R> {
    if q <= R::one() {
        return Err(Error::Domain(format!(
            "ridgeless kappa requires q > 1 (kappa = 0 for q <= 1), got q = {q}"
        )));
    }
    let target = R::one() / q;
    let lam_max = spectrum.iter().cloned().fold(R::zero(), R::max);
    let lo = R::of(1e-14) * lam_max;
    let hi = R::of(1e14) * lam_max;
    Ok(bisect_decreasing_log(lo, hi, target, |k| df1(spectrum, k).unwrap()))
}

/// `df_tilde_2` from the kernel transform and its derivative at `df_tilde_1`:
/// with `phi(u) = S_K(u)/(1-u)` and `c = u d log phi / d log u`,
/// `df_tilde_2 = u c / (1 + c)`.
fn df_tilde_2_from_kernel<R: Real>(s_kernel: &STransform<R>, u: R) -> Result<R> {
    if u >= R::one() {
        // invertible kernel: df2_K(0) = 1
        return Ok(R::one());
    }
    let s = s_kernel.value(u)?;
    let ds = s_kernel.derivative(u)?;
    let c = u * (ds / s + R::one() / (R::one() - u));
    Ok(u * c / (R::one() + c))
}

/// Solve the fixed point and assemble the full solution record.
pub fn solve<R: Real>(input: &SolveInput<'_, R>) -> Result<SelfConsistentSolution<R>> {
    if input.spectrum.is_empty() {
        return Err(Error::Domain("empty spectrum".into()));
    }
    if input.q <= R::zero() {
        return Err(Error::Domain("q must be positive".into()));
    }
    if input.lambda < R::zero() {
        return Err(Error::Domain("lambda must be nonnegative".into()));
    }
    match input.mode {
        SolveMode::Empirical => solve_empirical(input),
        SolveMode::Omniscient => {
            let n = R::of(input.spectrum.len() as f64);
            let mean = input.spectrum.iter().fold(R::zero(), |a, &l| a + l) / n;
            if input.lambda <= R::of(RIDGELESS_FACTOR) * mean {
                solve_ridgeless(input)
            } else {
                solve_generic(input)
            }
        }
    }
}

fn assemble<R: Real>(
    input: &SolveInput<'_, R>,
    kappa: R,
    iterations: usize,
) -> Result<SelfConsistentSolution<R>> {
    let lambda = input.lambda;
    let d1 = df1(input.spectrum, kappa)?;
    let u = input.q * d1;
    let s = kappa / lambda;
    let kappa_tilde = lambda / (kappa * u);
    let s_tilde = kappa_tilde / lambda;
    let d2 = df2(input.spectrum, kappa)?;
    let dt2 = df_tilde_2_from_kernel(input.s_kernel, u)?;
    let gamma = (d2 / d1) * (dt2 / u);
    let one = R::one();
    let (dk, dkt) = if gamma < one {
        (
            s * (one - dt2 / u) / (one - gamma),
            s_tilde * (one - d2 / d1) / (one - gamma),
        )
    } else {
        (R::infinity(), R::infinity())
    };
    Ok(SelfConsistentSolution {
        kappa,
        kappa_tilde,
        s,
        s_tilde,
        df1: d1,
        df2: d2,
        df_tilde_1: u,
        df_tilde_2: dt2,
        gamma,
        dkappa_dlambda: dk,
        dkappa_tilde_dlambda: dkt,
        lambda,
        q: input.q,
        converged: true,
        iterations,
    })
}

fn solve_generic<R: Real>(input: &SolveInput<'_, R>) -> Result<SelfConsistentSolution<R>> {
    let lambda = input.lambda;
    // Pole floor: for q >= 1 the map is only defined above the kappa with
    // q df1(kappa) = 1.
    let floor = if input.q >= R::one() {
        let lam_max = input.spectrum.iter().cloned().fold(R::zero(), R::max);
        let lo = R::of(1e-16) * lam_max;
        let hi = R::of(1e16) * lam_max;
        bisect_decreasing_log(lo, hi, R::one() / input.q, |k| df1(input.spectrum, k).unwrap())
    } else {
        R::zero()
    };

    // Damped Picard iteration.
    let damping = R::of(0.5);
    let mut kappa = (floor + lambda).max(lambda);
    let mut iterations = 0usize;
    let mut converged = false;
    for _ in 0..300 {
        iterations += 1;
        let mapped = match picard_map(input, kappa) {
            Ok(v) => v,
            Err(_) => {
                kappa = (kappa + floor) * R::of(0.5) + lambda;
                continue;
            }
        };
        let next = damping * kappa + (R::one() - damping) * mapped;
        let next = next.max(floor * (R::one() + R::of(1e-15)));
        // run to (near) floating-point adjacency so finite-difference oracles
        // applied on top of the solver see a smooth function
        if (next - kappa).abs() <= R::of(1e-15) * next {
            kappa = next;
            converged = true;
            break;
        }
        kappa = next;
    }

    if !converged {
        // Bisection fallback on the increasing residual kappa - map(kappa).
        let mut lo = if floor > R::zero() {
            floor * (R::one() + R::of(1e-14)) + R::of(1e-300)
        } else {
            R::of(1e-300)
        };
        // guard: residual at lo must be negative; nudge until the map evaluates
        let mut guard = 0usize;
        while picard_map(input, lo).is_err() {
            lo = lo * R::of(1.0 + 1e-12) + lambda * R::of(1e-16);
            guard += 1;
            if guard > 200 {
                return Err(Error::SolverDiverged { iterations, residual: f64::NAN });
            }
        }
        let mut hi = (lo + lambda).max(kappa);
        let mut expand = 0usize;
        loop {
            match picard_map(input, hi) {
                Ok(m) if hi - m >= R::zero() => break,
                _ => {
                    hi = hi * R::of(2.0) + lambda;
                    expand += 1;
                    iterations += 1;
                    if expand > 2000 || iterations > MAX_ITERATIONS {
                        let residual =
                            picard_map(input, hi).map(|m| (hi - m).to_f64_lossy()).unwrap_or(f64::NAN);
                        return Err(Error::SolverDiverged { iterations, residual });
                    }
                }
            }
        }
        kappa = bisect_increasing(lo, hi, |k| match picard_map(input, k) {
            Ok(m) => k - m,
            Err(_) => -R::one(),
        });
        iterations += 64;
    }

    // The root is localized to floating-point adjacency by bisection (or to
    // 1e-15 relative by Picard), which meets the 1e-12 contract on kappa. The
    // raw map residual additionally scales with the local slope of the map, so
    // it is checked only against a slope-aware bound.
    let mapped = picard_map(input, kappa)?;
    let residual = ((kappa - mapped) / kappa).abs();
    let slope = {
        let h = kappa * R::of(1e-8);
        let up = picard_map(input, kappa + h)?;
        ((up - mapped) / h).abs().max(R::one())
    };
    if residual > R::of(FIXED_POINT_TOL).max(R::of(1e-14) * slope) * R::of(100.0) {
        return Err(Error::SolverDiverged { iterations, residual: residual.to_f64_lossy() });
    }
    assemble(input, kappa, iterations)
}

/// Pole-equation branch for `lambda` at (or numerically indistinguishable from)
/// zero: the regime `q < 1` sends `kappa` to zero, `q > 1` sends `kappa_tilde`
/// to zero, and `q = 1` sends both (divergent risk).
fn solve_ridgeless<R: Real>(input: &SolveInput<'_, R>) -> Result<SelfConsistentSolution<R>> {
    let one = R::one();
    let q = input.q;
    let lambda = input.lambda;
    let n = R::of(input.spectrum.len() as f64);
    let mean_inv_sigma =
        input.spectrum.iter().fold(R::zero(), |a, &l| a + one / l) / n;

    if q > one {
        let kappa = ridgeless_kappa(input.spectrum, q)?;
        let d1 = one / q;
        let d2 = df2(input.spectrum, kappa)?;
        let dt1 = one;
        let dt2 = one;
        let gamma = (d2 / d1) * (dt2 / dt1);
        let kappa_tilde = lambda / kappa;
        let s = if lambda > R::zero() { kappa / lambda } else { R::infinity() };
        let s_tilde = one / kappa;
        // dkappa/dlambda -> S_K(1) / (1 - gamma); dkt/dlambda = s_tilde closure
        let m1 = input.s_kernel.value(one)?;
        let dk = m1 / (one - gamma);
        let dkt = s_tilde * (one - d2 / d1) / (one - gamma);
        Ok(SelfConsistentSolution {
            kappa,
            kappa_tilde,
            s,
            s_tilde,
            df1: d1,
            df2: d2,
            df_tilde_1: dt1,
            df_tilde_2: dt2,
            gamma,
            dkappa_dlambda: dk,
            dkappa_tilde_dlambda: dkt,
            lambda,
            q,
            converged: true,
            iterations: 0,
        })
    } else if q < one {
        // kappa -> 0; kappa_tilde solves df1_K(kt) = q, i.e. kt = (1-q)/(q S_K(q)).
        let sq = input.s_kernel.value(q)?;
        let kappa_tilde = (one - q) / (q * sq);
        let s = sq / (one - q);
        let kappa = lambda * s;
        let s_tilde = if lambda > R::zero() { kappa_tilde / lambda } else { R::infinity() };
        let dt2 = df_tilde_2_from_kernel(input.s_kernel, q)?;
        let gamma = dt2 / q;
        let dk = s * (one - dt2 / q) / (one - gamma);
        // limit of s_tilde (1 - df2/df1): kappa_tilde * S * mean(1/lambda_k)
        let dkt = kappa_tilde * s * mean_inv_sigma / (one - gamma);
        Ok(SelfConsistentSolution {
            kappa,
            kappa_tilde,
            s,
            s_tilde,
            df1: one,
            df2: one,
            df_tilde_1: q,
            df_tilde_2: dt2,
            gamma,
            dkappa_dlambda: dk,
            dkappa_tilde_dlambda: dkt,
            lambda,
            q,
            converged: true,
            iterations: 0,
        })
    } else {
        // interpolation threshold: both ridges vanish, gamma -> 1, risk diverges
        Ok(SelfConsistentSolution {
            kappa: R::zero(),
            kappa_tilde: R::zero(),
            s: R::infinity(),
            s_tilde: R::infinity(),
            df1: one,
            df2: one,
            df_tilde_1: one,
            df_tilde_2: one,
            gamma: one,
            dkappa_dlambda: R::infinity(),
            dkappa_tilde_dlambda: R::infinity(),
            lambda,
            q,
            converged: true,
            iterations: 0,
        })
    }
}

/// Empirical mode: `df1` comes from the supplied (data) spectrum at the actual
/// ridge, and the second degrees of freedom are produced by the
/// finite-difference estimation chain (centered differences with one
/// Richardson level, step `1e-5 * lambda`) applied to the scalar pipelines
/// `lambda -> kappa(lambda)` and `lambda -> kappa_tilde(lambda)`.
fn solve_empirical<R: Real>(input: &SolveInput<'_, R>) -> Result<SelfConsistentSolution<R>> {
    let lambda = input.lambda;
    if lambda <= R::zero() {
        return Err(Error::EstimatorDomain("empirical mode requires lambda > 0".into()));
    }
    let one = R::one();
    let q = input.q;
    let d1_hat = |l: R| df1(input.spectrum, l).unwrap();
    let kappa_of = |l: R| -> Result<R> {
        let u = q * d1_hat(l);
        if u >= one {
            return Err(Error::EstimatorDomain(format!("q df1_hat(lambda) = {u} >= 1")));
        }
        Ok(l * input.s_kernel.value(u)? / (one - u))
    };
    let d1 = d1_hat(lambda);
    let u = q * d1;
    if u >= one {
        return Err(Error::EstimatorDomain(format!(
            "q df1_hat(lambda) = {u} >= 1: ridge too small for this sample"
        )));
    }
    let kappa = kappa_of(lambda)?;
    let kappa_tilde = lambda / (kappa * u);
    let s = kappa / lambda;
    let s_tilde = kappa_tilde / lambda;

    let h = R::of(1e-5) * lambda;
    let dlog_kappa = richardson_diff(|l| kappa_of(l).unwrap().ln(), lambda, h);
    let dlog_kappa_tilde = richardson_diff(
        |l| (l / (kappa_of(l).unwrap() * q * d1_hat(l))).ln(),
        lambda,
        h,
    );
    let d_d1 = richardson_diff(d1_hat, lambda, h);

    let d2 = d1 + d_d1 / dlog_kappa;
    let dt2 = u - q * (dlog_kappa / dlog_kappa_tilde) * (d1 - d2);
    let gamma = (d2 / d1) * (dt2 / u);
    Ok(SelfConsistentSolution {
        kappa,
        kappa_tilde,
        s,
        s_tilde,
        df1: d1,
        df2: d2,
        df_tilde_1: u,
        df_tilde_2: dt2,
        gamma,
        dkappa_dlambda: kappa * dlog_kappa,
        dkappa_tilde_dlambda: kappa_tilde * dlog_kappa_tilde,
        lambda,
        q,
        converged: true,
        iterations: 0,
    })
}

/// Residuals of the exact relations every solution must satisfy.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityReport<R> {
    /// `kappa kappa_tilde df_tilde_1 / lambda = 1` (or its ridgeless limit).
    pub duality: R,
    /// Logarithmic-derivative closure of the duality relation.
    pub duality_derivative: R,
    /// `q (df2 - df1) = (dlog kt / dlog k)(df_tilde_2 - df_tilde_1)`.
    pub delta_df: R,
    /// `df_tilde_1 = q df1`.
    pub df_tilde_vs_q_df1: R,
}

impl<R: Real> IdentityReport<R> {
    pub fn max_residual(&self) -> R {
        self.duality
            .max(self.duality_derivative)
            .max(self.delta_df)
            .max(self.df_tilde_vs_q_df1)
    }
}

/// Evaluate the identity residuals for a solved instance.
pub fn verify_identities<R: Real>(sol: &SelfConsistentSolution<R>) -> IdentityReport<R> {
    let one = R::one();
    let duality = if sol.lambda > R::zero() {
        (sol.kappa * sol.kappa_tilde * sol.df_tilde_1 / sol.lambda - one).abs()
    } else {
        // limiting form: lambda/(kappa kappa_tilde) -> df_tilde_1 with
        // kappa_tilde = lambda/kappa exactly in the pole branch
        (sol.kappa * sol.kappa_tilde / sol.lambda.max(R::of(1e-300)) * sol.df_tilde_1 - one).abs()
    };

    let dlog_k = sol.lambda / sol.kappa * sol.dkappa_dlambda;
    let dlog_kt = sol.lambda / sol.kappa_tilde * sol.dkappa_tilde_dlambda;
    // empirical df2 of the design at lambda, reconstructed from the chain rule
    let df2_hat = sol.df1
        + sol.lambda * sol.dkappa_dlambda * (sol.df2 - sol.df1) / sol.kappa;
    let lhs = dlog_k + dlog_kt;
    let rhs = one + (sol.df1 - df2_hat) / sol.df1;
    let duality_derivative = ((lhs - rhs) / rhs).abs();

    let lhs_d = sol.q * (sol.df2 - sol.df1);
    let rhs_d = (dlog_kt / dlog_k) * (sol.df_tilde_2 - sol.df_tilde_1);
    let scale = lhs_d.abs().max(R::of(1e-30));
    let delta_df = ((lhs_d - rhs_d) / scale).abs();

    let df_tilde_vs_q_df1 =
        ((sol.df_tilde_1 - sol.q * sol.df1) / sol.df_tilde_1).abs();

    IdentityReport { duality, duality_derivative, delta_df, df_tilde_vs_q_df1 }
}
