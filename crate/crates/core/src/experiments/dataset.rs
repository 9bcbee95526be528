//! Matrix-Gaussian dataset generation with cached square-root factors.

use crate::covariance::SpectralCovariance;
use crate::dense::DenseSpd;
use crate::error::Result;
use crate::kernel::{CorrelationKernel, KernelFamily};
use crate::rng::{standard_normal_mat, standard_normal_vec, stream_rng, Component};
use faer::Mat;
use std::collections::HashMap;

/// One realized dataset: `y = X w + eps` exactly, with
/// `X = K^{1/2} Z Sigma^{1/2}` and `eps ~ N(0, sigma^2 K')`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Mat<f64>,
    pub y: Vec<f64>,
    pub eps: Vec<f64>,
    pub w_bar: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl Dataset {
    pub fn t(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    /// Labels with the noise removed (`X w`), for noiseless refits.
    pub fn clean_labels(&self) -> Vec<f64> {
        self.y.iter().zip(&self.eps).map(|(y, e)| y - e).collect()
    }
}

/// Caches the PSD square roots of the kernel matrices per size, so sweeps pay
/// for each eigendecomposition once.
pub struct GeneratorContext {
    cov: SpectralCovariance<f64>,
    kernel: KernelFamily,
    kernel_noise: KernelFamily,
    sigma_eps: f64,
    sqrt_cache: HashMap<(bool, usize), Mat<f64>>,
}

impl GeneratorContext {
    pub fn new(
        cov: SpectralCovariance<f64>,
        kernel: KernelFamily,
        kernel_noise: KernelFamily,
        sigma_eps: f64,
    ) -> Self {
        Self { cov, kernel, kernel_noise, sigma_eps, sqrt_cache: HashMap::new() }
    }

    pub fn covariance(&self) -> &SpectralCovariance<f64> {
        &self.cov
    }

    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps
    }

    pub fn kernel(&self) -> KernelFamily {
        self.kernel
    }

    pub fn kernel_matrix(&self, t: usize) -> Result<DenseSpd> {
        CorrelationKernel::stationary(self.kernel, t)?.build()
    }

    fn kernel_sqrt(&mut self, noise_side: bool, t: usize) -> Result<&Mat<f64>> {
        if !self.sqrt_cache.contains_key(&(noise_side, t)) {
            let family = if noise_side { self.kernel_noise } else { self.kernel };
            let root = if matches!(family, KernelFamily::Identity) {
                Mat::identity(t, t)
            } else {
                let k = CorrelationKernel::stationary(family, t)?.build()?;
                k.psd_sqrt()?.mat().to_owned()
            };
            self.sqrt_cache.insert((noise_side, t), root);
        }
        Ok(&self.sqrt_cache[&(noise_side, t)])
    }

    /// Draw the dataset addressed by `(seed, stream)` at size `T`.
    pub fn generate(&mut self, t: usize, seed: u64, stream: u64) -> Result<Dataset> {
        let n = self.cov.dimension();
        let sigma_eps = self.sigma_eps;

        let mut rng_z = stream_rng(seed, stream, Component::Design);
        let z = standard_normal_mat(&mut rng_z, t, n);
        let k_sqrt = self.kernel_sqrt(false, t)?;
        // X = K^{1/2} Z Sigma^{1/2}, with Sigma diagonal in its eigenbasis
        let mut x = k_sqrt * &z;
        for (j, &l) in self.cov.eigenvalues().iter().enumerate() {
            let root = l.sqrt();
            for i in 0..t {
                x[(i, j)] *= root;
            }
        }

        let eps = if sigma_eps > 0.0 {
            let mut rng_e = stream_rng(seed, stream, Component::Noise);
            let g = standard_normal_vec(&mut rng_e, t);
            if matches!(self.kernel_noise, KernelFamily::Identity) {
                g.iter().map(|v| sigma_eps * v).collect()
            } else {
                let kp_sqrt = self.kernel_sqrt(true, t)?;
                let gv = Mat::from_fn(t, 1, |i, _| g[i]);
                let e = kp_sqrt * &gv;
                (0..t).map(|i| sigma_eps * e[(i, 0)]).collect()
            }
        } else {
            vec![0.0; t]
        };

        let w_bar = self.cov.teacher().to_vec();
        let mut y = eps.clone();
        for i in 0..t {
            let mut acc = 0.0;
            for j in 0..n {
                acc += x[(i, j)] * w_bar[j];
            }
            y[i] += acc;
        }
        Ok(Dataset { x, y, eps, w_bar, seed, stream })
    }
}

/// Convenience wrapper generating a single dataset without a reusable context.
pub fn generate_dataset(
    cov: &SpectralCovariance<f64>,
    kernel: KernelFamily,
    kernel_noise: KernelFamily,
    sigma_eps: f64,
    t: usize,
    seed: u64,
    stream: u64,
) -> Result<Dataset> {
    GeneratorContext::new(cov.clone(), kernel, kernel_noise, sigma_eps).generate(t, seed, stream)
}
