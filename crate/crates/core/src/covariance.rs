//! Spectral covariances and degrees-of-freedom functionals.
//!
//! A feature covariance is carried as its eigenvalue spectrum plus the teacher
//! components in the same eigenbasis; every downstream formula is rotation
//! invariant, so the basis itself is never materialized.

use crate::error::{Error, Result};
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Feature covariance spectrum with teacher alignment.
///
/// Invariants: all eigenvalues positive and sorted descending, teacher on the
/// unit sphere, and both vectors of equal length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralCovariance<R> {
    eigenvalues: Vec<R>,
    teacher: Vec<R>,
    /// Capacity exponent when built from a power law.
    pub capacity: Option<R>,
    /// Source exponent when built from a power law.
    pub source: Option<R>,
}

impl<R: Real> SpectralCovariance<R> {
    /// Build from explicit spectrum and teacher components.
    ///
    /// Sorts the spectrum descending (keeping teacher components paired) and
    /// rescales the teacher to unit norm.
    pub fn new(eigenvalues: Vec<R>, teacher: Vec<R>) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != teacher.len() {
            return Err(Error::DimensionMismatch(format!(
                "spectrum length {} vs teacher length {}",
                eigenvalues.len(),
                teacher.len()
            )));
        }
        if eigenvalues.iter().any(|&l| l <= R::zero() || !l.is_finite()) {
            return Err(Error::Domain("covariance eigenvalues must be positive".into()));
        }
        let mut pairs: Vec<(R, R)> = eigenvalues.into_iter().zip(teacher).collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let norm = pairs.iter().fold(R::zero(), |acc, p| acc + p.1 * p.1).sqrt();
        if norm <= R::zero() {
            return Err(Error::Domain("teacher must be nonzero".into()));
        }
        let (eigenvalues, teacher) = pairs.into_iter().map(|(l, w)| (l, w / norm)).unzip();
        Ok(Self { eigenvalues, teacher, capacity: None, source: None })
    }

    /// Isotropic covariance with a uniform teacher.
    pub fn isotropic(n: usize) -> Self {
        let w = (R::one() / R::of(n as f64)).sqrt();
        Self {
            eigenvalues: vec![R::one(); n],
            teacher: vec![w; n],
            capacity: None,
            source: None,
        }
    }

    /// Power-law covariance under source/capacity conditions: eigenvalues
    /// `k^-alpha` and teacher chosen so that `lambda_k w_k^2 ~ k^-(2 alpha r + 1)`,
    /// rescaled to the unit sphere.
    pub fn power_law(alpha: R, r: R, n: usize) -> Result<Self> {
        if alpha <= R::zero() || r <= R::zero() || n == 0 {
            return Err(Error::Domain("power-law covariance needs alpha > 0, r > 0, n >= 1".into()));
        }
        let two = R::of(2.0);
        let w_exp = (alpha - two * alpha * r - R::one()) / two;
        let mut eigenvalues = Vec::with_capacity(n);
        let mut teacher = Vec::with_capacity(n);
        for k in 1..=n {
            let kf = R::of(k as f64);
            eigenvalues.push(kf.powf(-alpha));
            teacher.push(kf.powf(w_exp));
        }
        let mut cov = Self::new(eigenvalues, teacher)?;
        cov.capacity = Some(alpha);
        cov.source = Some(r);
        Ok(cov)
    }

    /// Replace the teacher with an explicit unit-norm vector (paired to the
    /// already-sorted spectrum).
    pub fn with_teacher(mut self, teacher: Vec<R>) -> Result<Self> {
        if teacher.len() != self.eigenvalues.len() {
            return Err(Error::DimensionMismatch("teacher length".into()));
        }
        let norm = teacher.iter().fold(R::zero(), |acc, &w| acc + w * w).sqrt();
        if norm <= R::zero() {
            return Err(Error::Domain("teacher must be nonzero".into()));
        }
        self.teacher = teacher.into_iter().map(|w| w / norm).collect();
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[R] {
        &self.eigenvalues
    }

    pub fn teacher(&self) -> &[R] {
        &self.teacher
    }

    pub fn df1(&self, ridge: R) -> Result<R> {
        df1(&self.eigenvalues, ridge)
    }

    pub fn df2(&self, ridge: R) -> Result<R> {
        df2(&self.eigenvalues, ridge)
    }

    /// Teacher-weighted quadratic `sum_k w_k^2 f(lambda_k)`.
    pub fn teacher_quadratic(&self, mut f: impl FnMut(R) -> R) -> R {
        self.eigenvalues
            .iter()
            .zip(&self.teacher)
            .fold(R::zero(), |acc, (&l, &w)| acc + w * w * f(l))
    }
}

/// First degrees of freedom `(1/N) sum lambda_k / (lambda_k + ridge)`.
pub fn df1<R: Real>(spectrum: &[R], ridge: R) -> Result<R> {
    if ridge < R::zero() {
        return Err(Error::Domain(format!("df1 requires ridge >= 0, got {ridge}")));
    }
    let n = R::of(spectrum.len() as f64);
    Ok(spectrum.iter().fold(R::zero(), |acc, &l| acc + l / (l + ridge)) / n)
}

/// Second degrees of freedom `(1/N) sum lambda_k^2 / (lambda_k + ridge)^2`.
pub fn df2<R: Real>(spectrum: &[R], ridge: R) -> Result<R> {
    if ridge < R::zero() {
        return Err(Error::Domain(format!("df2 requires ridge >= 0, got {ridge}")));
    }
    let n = R::of(spectrum.len() as f64);
    Ok(spectrum
        .iter()
        .fold(R::zero(), |acc, &l| {
            let r = l / (l + ridge);
            acc + r * r
        })
        / n)
}

/// Cross degrees of freedom `(1/N) sum a_k b_k / (a_k + ridge)^2` for two
/// co-diagonal spectra; reduces to [`df2`] when `b == a`.
pub fn df2_cross<R: Real>(a: &[R], b: &[R], ridge: R) -> Result<R> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "df2_cross spectra of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if ridge < R::zero() {
        return Err(Error::Domain("df2_cross requires ridge >= 0".into()));
    }
    let n = R::of(a.len() as f64);
    Ok(a.iter()
        .zip(b)
        .fold(R::zero(), |acc, (&ak, &bk)| {
            let d = ak + ridge;
            acc + ak * bk / (d * d)
        })
        / n)
}

/// Functional inverse of `ridge -> df1(spectrum, ridge)` by geometric bisection,
/// bracketed 14 decades either side of the largest eigenvalue.
pub fn df1_inverse<R: Real>(spectrum: &[R], df: R) -> Result<R> {
    if df <= R::zero() || df >= R::one() {
        return Err(Error::Domain(format!("df1_inverse requires df in (0, 1), got {df}")));
    }
    let lam_max = spectrum.iter().cloned().fold(R::zero(), R::max);
    let lo = R::of(1e-14) * lam_max;
    let hi = R::of(1e14) * lam_max;
    let root = crate::numeric::bisect_decreasing_log(lo, hi, df, |l| df1(spectrum, l).unwrap());
    Ok(root)
}

/// Dirichlet eta function by Euler-accelerated alternating series.
///
/// Iterated averaging of the partial sums converges for every `chi > 0`
/// (including the conditionally convergent region) well below 1e-10 with 64
/// terms.
pub fn dirichlet_eta<R: Real>(chi: R) -> Result<R> {
    if chi <= R::zero() {
        return Err(Error::Domain(format!("dirichlet_eta requires chi > 0, got {chi}")));
    }
    const TERMS: usize = 64;
    let mut partial = Vec::with_capacity(TERMS);
    let mut acc = R::zero();
    let mut sign = R::one();
    for k in 1..=TERMS {
        acc = acc + sign * R::of(k as f64).powf(-chi);
        partial.push(acc);
        sign = -sign;
    }
    while partial.len() > 1 {
        for i in 0..partial.len() - 1 {
            partial[i] = R::of(0.5) * (partial[i] + partial[i + 1]);
        }
        partial.pop();
    }
    Ok(partial[0])
}

/// Minimum of the power-law Toeplitz symbol: `2 eta(chi) - 1`.
///
/// Lower-bounds the smallest eigenvalue of the finite `(1+|t-s|)^-chi` Toeplitz
/// matrix at every size, and equals its large-size limit.
pub fn powerlaw_symbol_min<R: Real>(chi: R) -> Result<R> {
    Ok(R::of(2.0) * dirichlet_eta(chi)? - R::one())
}
