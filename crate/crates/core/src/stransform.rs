//! S-transforms of correlation kernels under the degrees-of-freedom argument
//! convention: `S_A(df) = (1 - df) / (df * df1_A^{-1}(df))`.
//!
//! Every unit-trace kernel satisfies the endpoint identities
//! `S(df -> 0) = 1` and `S(1) = (1/T) Tr(K^{-1})`, and `S_K >= 1` pointwise.
//! The analytic closed forms here are the endpoint-consistent ones; each is
//! cross-checked in tests against the empirical (bisection) transform of the
//! corresponding dense spectrum.

use crate::covariance::{df1_inverse, df2};
use crate::error::{Error, Result};
use crate::numeric::{horner, poly_derivative, MonotoneCubic};
use crate::real::Real;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// An S-transform evaluator over `df in (0, 1]`, with an exact or
/// piecewise-exact first derivative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum STransform<R> {
    /// Identity kernel: constant 1.
    Identity,
    /// White-Wishart multiplicative factor `1 / (1 - q df)`.
    WishartFactor { q: R },
    /// Exponential Toeplitz kernel; `b = coth(1/xi)`.
    Exponential { b: R },
    /// Nearest-neighbor (tridiagonal) Toeplitz kernel with off-diagonal `b/2`.
    NearestNeighbor { b: R },
    /// Bisection inverse of `df1` over an explicit spectrum.
    Empirical(EmpiricalS<R>),
    /// Population kernel transform recovered from a Gram spectrum.
    GramRecovered(GramS<R>),
    /// Least-squares polynomial in `df` fitted through samples.
    Poly(PolyS<R>),
    /// Monotone piecewise-cubic interpolant through samples.
    MonotoneCubic(MonotoneCubicS<R>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalS<R> {
    spectrum: Vec<R>,
    mean_inverse: R,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramS<R> {
    /// Nonzero Gram eigenvalues.
    nonzero: Vec<R>,
    /// Full Gram order `T` (zero modes included in the normalization).
    t: usize,
    q: R,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyS<R> {
    coeffs: Vec<R>,
    deriv: Vec<R>,
    pub df_min: R,
    pub df_max: R,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneCubicS<R> {
    interp: MonotoneCubic<R>,
    pub df_min: R,
    pub df_max: R,
}

/// Interpolation method used by [`interpolate_s`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationMethod {
    /// Global degree-5 least squares in `df` (the default).
    Poly5,
    /// Monotone piecewise cubic, for strongly curved transforms.
    MonotoneCubic,
}

pub fn s_identity<R: Real>() -> STransform<R> {
    STransform::Identity
}

pub fn s_wishart_factor<R: Real>(q: R) -> Result<STransform<R>> {
    if q <= R::zero() {
        return Err(Error::Domain(format!("Wishart factor needs q > 0, got {q}")));
    }
    Ok(STransform::WishartFactor { q })
}

pub fn s_exponential<R: Real>(xi: R) -> Result<STransform<R>> {
    if xi <= R::zero() {
        return Err(Error::InvalidKernel(format!("exponential kernel needs xi > 0, got {xi}")));
    }
    // coth(1/xi); for tiny xi this saturates to 1 (uncorrelated limit).
    let inv = R::one() / xi;
    let b = if inv > R::of(350.0) { R::one() } else { R::one() / inv.tanh() };
    Ok(STransform::Exponential { b })
}

pub fn s_nearest_neighbor<R: Real>(b: R) -> Result<STransform<R>> {
    if b < R::zero() || b >= R::one() {
        return Err(Error::InvalidKernel(format!("nearest-neighbor kernel needs b in [0, 1), got {b}")));
    }
    Ok(STransform::NearestNeighbor { b })
}

pub fn s_empirical<R: Real>(spectrum: Vec<R>) -> Result<STransform<R>> {
    if spectrum.is_empty() || spectrum.iter().any(|&l| l <= R::zero() || !l.is_finite()) {
        return Err(Error::Domain("empirical S-transform needs a positive spectrum".into()));
    }
    let n = R::of(spectrum.len() as f64);
    let mean_inverse = spectrum.iter().fold(R::zero(), |acc, &l| acc + R::one() / l) / n;
    Ok(STransform::Empirical(EmpiricalS { spectrum, mean_inverse }))
}

/// Recover the population `S_K` from the spectrum of the Gram matrix
/// `K_hat = X X^T / T` alone:
/// `S_K(df) = (q - df)(1 - df) / (df * df1_Khat^{-1}(df))`.
pub fn s_from_gram<R: Real>(gram_spectrum: Vec<R>, q: R) -> Result<STransform<R>> {
    if gram_spectrum.is_empty() {
        return Err(Error::Domain("empty Gram spectrum".into()));
    }
    if q <= R::zero() {
        return Err(Error::Domain("s_from_gram needs q > 0".into()));
    }
    let t = gram_spectrum.len();
    let top = gram_spectrum.iter().cloned().fold(R::zero(), R::max);
    let floor = R::of(1e-12) * top;
    let nonzero: Vec<R> = gram_spectrum.into_iter().filter(|&l| l > floor).collect();
    if nonzero.is_empty() {
        return Err(Error::Domain("Gram spectrum has no nonzero eigenvalues".into()));
    }
    Ok(STransform::GramRecovered(GramS { nonzero, t, q }))
}

/// Differentiable interpolant through `(df, S)` samples.
pub fn interpolate_s<R: Real>(
    samples: &[(R, R)],
    method: InterpolationMethod,
) -> Result<STransform<R>> {
    if samples.len() < 6 {
        return Err(Error::Domain(format!(
            "interpolate_s needs at least 6 samples, got {}",
            samples.len()
        )));
    }
    for w in samples.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Domain("interpolate_s needs a strictly increasing df grid".into()));
        }
    }
    let xs: Vec<R> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<R> = samples.iter().map(|s| s.1).collect();
    let (df_min, df_max) = (xs[0], xs[xs.len() - 1]);
    Ok(match method {
        InterpolationMethod::Poly5 => {
            let coeffs = crate::numeric::polyfit(&xs, &ys, 5);
            let deriv = poly_derivative(&coeffs);
            STransform::Poly(PolyS { coeffs, deriv, df_min, df_max })
        }
        InterpolationMethod::MonotoneCubic => STransform::MonotoneCubic(MonotoneCubicS {
            interp: MonotoneCubic::fit(&xs, &ys),
            df_min,
            df_max,
        }),
    })
}

impl<R: Real> STransform<R> {
    /// Evaluate at `df in (0, 1]`.
    pub fn value(&self, df: R) -> Result<R> {
        if !(df > R::zero() && df <= R::one()) && !matches!(self, STransform::GramRecovered(_)) {
            return Err(Error::Domain(format!("S-transform argument must be in (0, 1], got {df}")));
        }
        match self {
            STransform::Identity => Ok(R::one()),
            STransform::WishartFactor { q } => {
                let x = *q * df;
                if x >= R::one() {
                    return Err(Error::Pole(format!("Wishart factor pole: q*df = {x} >= 1")));
                }
                Ok(R::one() / (R::one() - x))
            }
            STransform::Exponential { b } => {
                let root = (R::one() + (*b * *b - R::one()) * df * df).sqrt();
                Ok((*b * df + root) / (R::one() + df))
            }
            STransform::NearestNeighbor { b } => {
                let root = (R::one() - *b * *b * df * (R::of(2.0) - df)).sqrt();
                Ok((R::of(2.0) - df) / ((R::one() - df) + root))
            }
            STransform::Empirical(e) => {
                if df == R::one() {
                    // analytic limit: S(1) = (1/N) sum 1/lambda_k
                    return Ok(e.mean_inverse);
                }
                let lam = df1_inverse(&e.spectrum, df)?;
                Ok((R::one() - df) / (df * lam))
            }
            STransform::GramRecovered(g) => {
                let cap = R::one().min(g.q);
                if df <= R::zero() || df >= cap {
                    return Err(Error::Domain(format!(
                        "gram-recovered S-transform needs df in (0, min(1, q)) = (0, {cap}), got {df}"
                    )));
                }
                let lam = g.df1_inverse(df);
                Ok((g.q - df) * (R::one() - df) / (df * lam))
            }
            STransform::Poly(p) => Ok(horner(&p.coeffs, df)),
            STransform::MonotoneCubic(m) => Ok(m.interp.value(df)),
        }
    }

    /// First derivative with respect to `df` (exact per variant; piecewise for
    /// the monotone-cubic interpolant).
    pub fn derivative(&self, df: R) -> Result<R> {
        match self {
            STransform::Identity => Ok(R::zero()),
            STransform::WishartFactor { q } => {
                let x = *q * df;
                if x >= R::one() {
                    return Err(Error::Pole(format!("Wishart factor pole: q*df = {x} >= 1")));
                }
                let d = R::one() - x;
                Ok(*q / (d * d))
            }
            STransform::Exponential { b } => {
                let b = *b;
                let root = (R::one() + (b * b - R::one()) * df * df).sqrt();
                let droot = (b * b - R::one()) * df / root;
                let num = (b + droot) * (R::one() + df) - (b * df + root);
                Ok(num / ((R::one() + df) * (R::one() + df)))
            }
            STransform::NearestNeighbor { b } => {
                let b = *b;
                let two = R::of(2.0);
                let root = (R::one() - b * b * df * (two - df)).sqrt();
                let den = (R::one() - df) + root;
                let droot = -b * b * (R::one() - df) / root;
                let dden = -R::one() + droot;
                Ok((-den - (two - df) * dden) / (den * den))
            }
            STransform::Empirical(e) => {
                let lam = if df == R::one() {
                    R::zero()
                } else {
                    df1_inverse(&e.spectrum, df)?
                };
                if lam == R::zero() {
                    return Err(Error::Domain("empirical S derivative undefined at df = 1".into()));
                }
                // dlam/ddf = lam / (df2(lam) - df), from df1'(lam) = (df2 - df1)/lam
                let d2 = df2(&e.spectrum, lam)?;
                let dlam = lam / (d2 - df);
                let den = df * lam;
                let dden = lam + df * dlam;
                Ok((-den - (R::one() - df) * dden) / (den * den))
            }
            STransform::GramRecovered(g) => {
                let cap = R::one().min(g.q);
                if df <= R::zero() || df >= cap {
                    return Err(Error::Domain("gram-recovered S derivative out of domain".into()));
                }
                let lam = g.df1_inverse(df);
                let d2 = g.df2(lam);
                let dlam = lam / (d2 - df);
                let num = (g.q - df) * (R::one() - df);
                let dnum = R::of(2.0) * df - (R::one() + g.q);
                let den = df * lam;
                let dden = lam + df * dlam;
                Ok((dnum * den - num * dden) / (den * den))
            }
            STransform::Poly(p) => Ok(horner(&p.deriv, df)),
            STransform::MonotoneCubic(m) => Ok(m.interp.derivative(df)),
        }
    }

    /// Valid argument interval.
    pub fn domain(&self) -> (R, R) {
        match self {
            STransform::GramRecovered(g) => (R::zero(), R::one().min(g.q)),
            STransform::Poly(p) => (p.df_min, p.df_max),
            STransform::MonotoneCubic(m) => (m.df_min, m.df_max),
            _ => (R::zero(), R::one()),
        }
    }

    /// Sample `(df, S(df))` on a grid.
    pub fn sample_table(&self, grid: &[R]) -> Result<Vec<(R, R)>> {
        grid.iter().map(|&df| Ok((df, self.value(df)?))).collect()
    }
}

impl<R: Real> GramS<R> {
    fn df1_khat(&self, lam: R) -> R {
        let t = R::of(self.t as f64);
        self.nonzero.iter().fold(R::zero(), |acc, &l| acc + l / (l + lam)) / t
    }

    fn df2(&self, lam: R) -> R {
        let t = R::of(self.t as f64);
        self.nonzero
            .iter()
            .fold(R::zero(), |acc, &l| {
                let r = l / (l + lam);
                acc + r * r
            })
            / t
    }

    fn df1_inverse(&self, df: R) -> R {
        let top = self.nonzero.iter().cloned().fold(R::zero(), R::max);
        let lo = R::of(1e-14) * top;
        let hi = R::of(1e14) * top;
        crate::numeric::bisect_decreasing_log(lo, hi, df, |l| self.df1_khat(l))
    }
}

/// Write a sampled S-transform table as two-column CSV (`df,S`).
pub fn write_table_csv<R: Real>(path: &std::path::Path, table: &[(R, R)]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "df,S")?;
    for (df, s) in table {
        writeln!(f, "{df},{s}")?;
    }
    Ok(())
}

/// Read a two-column CSV table written by [`write_table_csv`].
pub fn read_table_csv<R: Real>(path: &std::path::Path) -> Result<Vec<(R, R)>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in f.lines().enumerate() {
        let line = line?;
        if idx == 0 && line.starts_with("df") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<R> {
            let raw = s.ok_or_else(|| Error::Config(format!("bad table line: {line}")))?;
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number {raw:?} in table")))?;
            Ok(R::of(v))
        };
        out.push((parse(parts.next())?, parse(parts.next())?));
    }
    Ok(out)
}
