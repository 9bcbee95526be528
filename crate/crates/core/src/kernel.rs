//! Sample-sample correlation kernels: unit-diagonal SPD Toeplitz families plus
//! an explicit-matrix escape hatch.

use crate::dense::DenseSpd;
use crate::error::{Error, Result};
use crate::stransform::{s_empirical, s_exponential, s_identity, s_nearest_neighbor, STransform};
use serde::{Deserialize, Serialize};

/// Stationary kernel family (parameters only, no size).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    Identity,
    /// `K_ts = exp(-|t-s| / xi)`
    Exponential { xi: f64 },
    /// `K_ts = 1` on the diagonal, `b/2` off by one, 0 otherwise.
    NearestNeighbor { b: f64 },
    /// `K_ts = (1 + |t-s|)^-chi`
    PowerLaw { chi: f64 },
}

impl KernelFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelFamily::Identity => Ok(()),
            KernelFamily::Exponential { xi } if xi > 0.0 => Ok(()),
            KernelFamily::Exponential { xi } => {
                Err(Error::InvalidKernel(format!("exponential kernel needs xi > 0, got {xi}")))
            }
            KernelFamily::NearestNeighbor { b } if (0.0..1.0).contains(&b) => Ok(()),
            KernelFamily::NearestNeighbor { b } => {
                Err(Error::InvalidKernel(format!("nearest-neighbor kernel needs b in [0, 1), got {b}")))
            }
            KernelFamily::PowerLaw { chi } if chi > 0.0 => Ok(()),
            KernelFamily::PowerLaw { chi } => {
                Err(Error::InvalidKernel(format!("power-law kernel needs chi > 0, got {chi}")))
            }
        }
    }

    /// Autocorrelation at integer lag (unit value at lag 0).
    pub fn autocorrelation(&self, lag: usize) -> f64 {
        match *self {
            KernelFamily::Identity => {
                if lag == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Exponential { xi } => (-(lag as f64) / xi).exp(),
            KernelFamily::NearestNeighbor { b } => match lag {
                0 => 1.0,
                1 => 0.5 * b,
                _ => 0.0,
            },
            KernelFamily::PowerLaw { chi } => (1.0 + lag as f64).powf(-chi),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            KernelFamily::Identity => "identity".into(),
            KernelFamily::Exponential { xi } => format!("exponential(xi={xi})"),
            KernelFamily::NearestNeighbor { b } => format!("nearest_neighbor(b={b})"),
            KernelFamily::PowerLaw { chi } => format!("power_law(chi={chi})"),
        }
    }
}

/// A correlation kernel of a definite size `T`.
#[derive(Debug, Clone)]
pub enum CorrelationKernel {
    Stationary { family: KernelFamily, t: usize },
    Explicit(DenseSpd),
}

impl CorrelationKernel {
    pub fn stationary(family: KernelFamily, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidKernel("kernel size must be >= 1".into()));
        }
        family.validate()?;
        Ok(CorrelationKernel::Stationary { family, t })
    }

    /// Wrap an explicit matrix, checking the unit diagonal.
    pub fn explicit(mat: DenseSpd) -> Result<Self> {
        for i in 0..mat.order() {
            if (mat.mat()[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidKernel(format!(
                    "explicit kernel must have unit diagonal, K[{i},{i}] = {}",
                    mat.mat()[(i, i)]
                )));
            }
        }
        Ok(CorrelationKernel::Explicit(mat))
    }

    pub fn size(&self) -> usize {
        match self {
            CorrelationKernel::Stationary { t, .. } => *t,
            CorrelationKernel::Explicit(m) => m.order(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, CorrelationKernel::Stationary { family: KernelFamily::Identity, .. })
    }

    pub fn family(&self) -> Option<KernelFamily> {
        match self {
            CorrelationKernel::Stationary { family, .. } => Some(*family),
            CorrelationKernel::Explicit(_) => None,
        }
    }

    /// Materialize the `T x T` kernel matrix.
    pub fn build(&self) -> Result<DenseSpd> {
        match self {
            CorrelationKernel::Explicit(m) => Ok(m.clone()),
            CorrelationKernel::Stationary { family, t } => {
                family.validate()?;
                let fam = *family;
                DenseSpd::from_fn(*t, move |i, j| {
                    fam.autocorrelation(i.abs_diff(j))
                })
            }
        }
    }

    /// S-transform of the kernel: closed form for identity / exponential /
    /// nearest-neighbor, empirical (dense eigendecomposition + bisection) for
    /// power-law and explicit kernels.
    pub fn s_transform(&self) -> Result<STransform<f64>> {
        match self {
            CorrelationKernel::Stationary { family: KernelFamily::Identity, .. } => Ok(s_identity()),
            CorrelationKernel::Stationary { family: KernelFamily::Exponential { xi }, .. } => {
                s_exponential(*xi)
            }
            CorrelationKernel::Stationary { family: KernelFamily::NearestNeighbor { b }, .. } => {
                s_nearest_neighbor(*b)
            }
            _ => {
                let k = self.build()?;
                s_empirical(k.eigenvalues().to_vec())
            }
        }
    }
}

/// Build the kernel matrix (free-function form of [`CorrelationKernel::build`]).
pub fn build_kernel_matrix(kernel: &CorrelationKernel) -> Result<DenseSpd> {
    kernel.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_is_identity_matrix() {
        let k = CorrelationKernel::stationary(KernelFamily::Identity, 3).unwrap();
        let m = k.build().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.mat()[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn exponential_small_case() {
        let k = CorrelationKernel::stationary(KernelFamily::Exponential { xi: 1.0 }, 2).unwrap();
        let m = k.build().unwrap();
        assert!((m.mat()[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(m.mat()[(0, 0)], 1.0);
    }

    #[test]
    fn nearest_neighbor_eigenvalues_closed_form() {
        // lambda_t = 1 + b cos(pi t / (T+1)), dense eigensolve oracle
        let b = 0.5;
        let t = 3usize;
        let k = CorrelationKernel::stationary(KernelFamily::NearestNeighbor { b }, t).unwrap();
        let m = k.build().unwrap();
        let mut expect: Vec<f64> =
            (1..=t).map(|i| 1.0 + b * (std::f64::consts::PI * i as f64 / (t as f64 + 1.0)).cos()).collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in m.eigenvalues().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn nearest_neighbor_eigenvalues_at_scale() {
        let b = 0.9;
        let t = 512usize;
        let k = CorrelationKernel::stationary(KernelFamily::NearestNeighbor { b }, t).unwrap();
        let m = k.build().unwrap();
        let mut expect: Vec<f64> =
            (1..=t).map(|i| 1.0 + b * (std::f64::consts::PI * i as f64 / (t as f64 + 1.0)).cos()).collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let worst = m
            .eigenvalues()
            .iter()
            .zip(&expect)
            .map(|(g, w)| (g - w).abs())
            .fold(0f64, f64::max);
        assert!(worst < 1e-9, "worst deviation {worst}");
    }

    #[test]
    fn unit_trace_all_families() {
        for family in [
            KernelFamily::Identity,
            KernelFamily::Exponential { xi: 7.0 },
            KernelFamily::NearestNeighbor { b: 0.8 },
            KernelFamily::PowerLaw { chi: 0.6 },
        ] {
            let k = CorrelationKernel::stationary(family, 37).unwrap();
            let m = k.build().unwrap();
            assert!((m.trace() / 37.0 - 1.0).abs() < 1e-15, "{family:?}");
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(CorrelationKernel::stationary(KernelFamily::NearestNeighbor { b: 1.0 }, 4).is_err());
        assert!(CorrelationKernel::stationary(KernelFamily::Exponential { xi: 0.0 }, 4).is_err());
        assert!(CorrelationKernel::stationary(KernelFamily::PowerLaw { chi: -0.2 }, 4).is_err());
    }

    #[test]
    fn symbol_min_bounds_finite_eigenvalues() {
        for chi in [0.4, 1.0, 2.5] {
            let bound: f64 = crate::covariance::powerlaw_symbol_min(chi).unwrap();
            for t in [16usize, 64, 256] {
                let k = CorrelationKernel::stationary(KernelFamily::PowerLaw { chi }, t).unwrap();
                let min = k.build().unwrap().eigenvalues()[0];
                assert!(min >= bound - 1e-10, "chi={chi} T={t}: {min} < {bound}");
            }
        }
    }
}
