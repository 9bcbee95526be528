//! Exact high-dimensional asymptotics for ridge regression with correlated
//! samples, together with the data-driven risk estimators they induce.
//!
//! The library is organised around the theory pipeline:
//!
//! * [`covariance`] — spectral covariances, degrees-of-freedom functionals,
//!   Toeplitz correlation kernels and their symbol analysis.
//! * [`stransform`] — S-transforms of the kernel families, in analytic,
//!   empirical (bisection) and interpolated form.
//! * [`selfconsistent`] — fixed-point solvers for the renormalized ridges
//!   `kappa` / `kappa_tilde` and all derived quantities.
//! * [`risk`] — omniscient risk, train error, bias-variance split, OOD and
//!   correlated-test-point variants, plus GCV-style correction factors.
//! * [`estimators`] — CorrGCV and baseline estimators computed from
//!   `(X, y, lambda)` alone.
//! * [`experiments`] — reproducible Monte Carlo harness used to validate
//!   every formula against simulation.
//!
//! Scalar-generic code is written against the [`Real`] trait; `f64` aliases
//! for the main types are exported at the crate root.

pub mod covariance;
pub mod dense;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod kernel;
pub mod numeric;
pub mod real;
pub mod risk;
pub mod rng;
pub mod selfconsistent;
pub mod stransform;
pub mod validate;

pub use covariance::SpectralCovariance;
pub use dense::DenseSpd;
pub use error::{Error, Result};
pub use kernel::{CorrelationKernel, KernelFamily};
pub use real::Real;
pub use risk::RiskReport;
pub use selfconsistent::{SelfConsistentSolution, SolveInput, SolveMode};
pub use stransform::STransform;

/// `f64` aliases for the scalar-generic core types.
pub type SpectralCovariance64 = SpectralCovariance<f64>;
pub type STransform64 = STransform<f64>;
pub type Solution64 = SelfConsistentSolution<f64>;
pub type RiskReport64 = RiskReport<f64>;
