//! Declarative experiment configuration shared by the sweep driver and the CLI.

use crate::covariance::SpectralCovariance;
use crate::error::{Error, Result};
use crate::kernel::KernelFamily;
use crate::stransform::InterpolationMethod;
use serde::{Deserialize, Serialize};

/// Feature covariance specification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CovarianceSpec {
    Identity { n: usize },
    PowerLaw { alpha: f64, r: f64, n: usize },
}

impl CovarianceSpec {
    pub fn n(&self) -> usize {
        match *self {
            CovarianceSpec::Identity { n } => n,
            CovarianceSpec::PowerLaw { n, .. } => n,
        }
    }

    /// Build the covariance. Isotropic covariances draw their teacher uniformly
    /// on the sphere from the master seed so every dataset seed shares one
    /// teacher; power-law covariances carry their deterministic teacher.
    pub fn build(&self, master_seed: u64) -> Result<SpectralCovariance<f64>> {
        match *self {
            CovarianceSpec::Identity { n } => {
                let mut rng =
                    crate::rng::stream_rng(master_seed, 0, crate::rng::Component::Teacher);
                let teacher = crate::rng::uniform_sphere(&mut rng, n);
                SpectralCovariance::isotropic(n).with_teacher(teacher)
            }
            CovarianceSpec::PowerLaw { alpha, r, n } => SpectralCovariance::power_law(alpha, r, n),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            CovarianceSpec::Identity { n } => format!("identity(n={n})"),
            CovarianceSpec::PowerLaw { alpha, r, n } => {
                format!("power_law(alpha={alpha},r={r},n={n})")
            }
        }
    }
}

/// How the kernel S-transform fed to the estimators is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SKernelProvenance {
    /// Closed form for the assumed correlation family.
    #[default]
    Analytic,
    /// Build the stationary kernel from its autocorrelation, eigendecompose,
    /// and use the empirical (bisection) transform.
    Stationary,
    /// Recover from the data's Gram spectrum and interpolate.
    Gram,
}

/// Full sweep configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub covariance: CovarianceSpec,
    pub kernel: KernelFamily,
    /// Noise correlation kernel; defaults to `kernel` (matched).
    pub kernel_noise: Option<KernelFamily>,
    pub t_grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    /// Correlated-test horizons; empty means uncorrelated test points only.
    #[serde(default)]
    pub tau_grid: Vec<usize>,
    pub sigma_eps: f64,
    pub seeds: u32,
    #[serde(default)]
    pub s_kernel: SKernelProvenance,
    /// Interpolation used when the kernel transform is sampled (gram route).
    #[serde(default = "default_interpolation")]
    pub s_interpolation: InterpolationMethod,
    /// Estimators to run; defaults to all four.
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    /// Ensemble size for the bias-variance decomposition; 0 disables it.
    #[serde(default)]
    pub decomposition_ensemble: usize,
    pub master_seed: u64,
}

fn default_estimators() -> Vec<String> {
    vec!["corrgcv".into(), "gcv1".into(), "gcv2".into(), "carmack".into()]
}

fn default_interpolation() -> InterpolationMethod {
    InterpolationMethod::Poly5
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() || self.lambda_grid.is_empty() {
            return Err(Error::Config("t_grid and lambda_grid must be non-empty".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be >= 1".into()));
        }
        if self.sigma_eps < 0.0 {
            return Err(Error::Config("sigma_eps must be nonnegative".into()));
        }
        if self.t_grid.iter().any(|&t| t < 2) {
            return Err(Error::Config("t values must be >= 2".into()));
        }
        if self.lambda_grid.iter().any(|&l| l <= 0.0) {
            return Err(Error::Config("lambda values must be positive for simulation".into()));
        }
        self.kernel.validate()?;
        if let Some(kp) = self.kernel_noise {
            kp.validate()?;
        }
        for e in &self.estimators {
            if !["corrgcv", "gcv1", "gcv2", "carmack"].contains(&e.as_str()) {
                return Err(Error::Config(format!("unknown estimator {e:?}")));
            }
        }
        Ok(())
    }

    pub fn noise_kernel(&self) -> KernelFamily {
        self.kernel_noise.unwrap_or(self.kernel)
    }

    pub fn is_matched(&self) -> bool {
        match self.kernel_noise {
            None => true,
            Some(kp) => kp == self.kernel,
        }
    }
}
