//! Declarative TOML configuration covering all subcommands, with field-level
//! validation diagnostics. Precedence is flags > config > defaults.

use corrgcv::experiments::{CovarianceSpec, ExperimentConfig, SKernelProvenance};
use corrgcv::kernel::KernelFamily;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSection {
    pub t: Vec<usize>,
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub tau: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorSection {
    #[serde(default = "default_set")]
    pub set: Vec<String>,
    #[serde(default)]
    pub s_kernel: SKernelProvenance,
    #[serde(default = "default_interpolation")]
    pub interpolation: corrgcv::stransform::InterpolationMethod,
}

fn default_interpolation() -> corrgcv::stransform::InterpolationMethod {
    corrgcv::stransform::InterpolationMethod::Poly5
}

fn default_set() -> Vec<String> {
    vec!["corrgcv".into(), "gcv1".into(), "gcv2".into(), "carmack".into()]
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            set: default_set(),
            s_kernel: SKernelProvenance::default(),
            interpolation: default_interpolation(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct DecompositionSection {
    #[serde(default)]
    pub ensemble: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct EstimateSection {
    /// Dataset size when generating; defaults to the first grid entry.
    pub t: Option<usize>,
    pub lambda: Option<f64>,
}

/// The whole config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CliConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub sigma_eps: f64,
    #[serde(default = "default_seeds")]
    pub seeds: u32,
    pub covariance: CovarianceSpec,
    pub kernel: KernelFamily,
    #[serde(default)]
    pub kernel_noise: Option<KernelFamily>,
    pub grid: GridSection,
    #[serde(default)]
    pub estimators: EstimatorSection,
    #[serde(default)]
    pub decomposition: DecompositionSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_seeds() -> u32 {
    1
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: CliConfig = toml::from_str(&text).map_err(|e| {
            // toml errors carry line/column spans
            format!("config parse error in {}: {e}", path.display())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.to_experiment_config().validate().map_err(|e| format!("config: {e}"))
    }

    pub fn to_experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            covariance: self.covariance,
            kernel: self.kernel,
            kernel_noise: self.kernel_noise,
            t_grid: self.grid.t.clone(),
            lambda_grid: self.grid.lambda.clone(),
            tau_grid: self.grid.tau.clone(),
            sigma_eps: self.sigma_eps,
            seeds: self.seeds,
            s_kernel: self.estimators.s_kernel,
            s_interpolation: self.estimators.interpolation,
            estimators: self.estimators.set.clone(),
            decomposition_ensemble: self.decomposition.ensemble,
            master_seed: self.master_seed,
        }
    }
}

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct CommonOpts {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

impl CommonOpts {
    /// Resolve the worker count: flags > `CORRGCV_WORKERS` > config > cores.
    pub fn resolve_workers(&self, config_workers: Option<usize>) -> usize {
        if let Some(w) = self.workers {
            return w.max(1);
        }
        if let Ok(env) = std::env::var("CORRGCV_WORKERS") {
            if let Ok(w) = env.parse::<usize>() {
                return w.max(1);
            }
        }
        config_workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
            .max(1)
    }

    pub fn out_dir(&self, config: &CliConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| config.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Apply the `--seed` override.
    pub fn apply_overrides(&self, config: &mut CliConfig) {
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
    }
}
