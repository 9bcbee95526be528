//! Dense symmetric positive-definite matrices backed by `faer`, with a cached
//! eigendecomposition and the PSD primitives the rest of the library needs.

use crate::error::{Error, Result};
use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, MatRef, Side};
use std::sync::OnceLock;

/// Relative symmetry tolerance enforced on construction.
const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues below `-PSD_CLAMP * ||A||` are an error; above it they clamp to zero.
const PSD_CLAMP: f64 = 1e-10;

/// Symmetric PSD matrix with a lazily computed, cached spectral decomposition.
pub struct DenseSpd {
    mat: Mat<f64>,
    eigen: OnceLock<(Vec<f64>, Mat<f64>)>,
}

impl std::fmt::Debug for DenseSpd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseSpd")
            .field("order", &self.order())
            .field("eigen_cached", &self.eigen.get().is_some())
            .finish()
    }
}

impl Clone for DenseSpd {
    fn clone(&self) -> Self {
        let out = Self { mat: self.mat.clone(), eigen: OnceLock::new() };
        if let Some(e) = self.eigen.get() {
            let _ = out.eigen.set(e.clone());
        }
        out
    }
}

impl DenseSpd {
    /// Wrap a symmetric matrix, enforcing symmetry to `1e-12` relative.
    pub fn new(mat: Mat<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix is not square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let mut scale = 0f64;
        for j in 0..mat.ncols() {
            for i in 0..mat.nrows() {
                scale = scale.max(mat[(i, j)].abs());
            }
        }
        let tol = SYMMETRY_TOL * scale.max(1.0);
        for j in 0..mat.ncols() {
            for i in 0..j {
                if (mat[(i, j)] - mat[(j, i)]).abs() > tol {
                    return Err(Error::Domain(format!(
                        "matrix not symmetric at ({i}, {j}): {} vs {}",
                        mat[(i, j)],
                        mat[(j, i)]
                    )));
                }
            }
        }
        Ok(Self { mat, eigen: OnceLock::new() })
    }

    pub fn from_fn(order: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(Mat::from_fn(order, order, f))
    }

    pub fn identity(order: usize) -> Self {
        Self { mat: Mat::identity(order, order), eigen: OnceLock::new() }
    }

    pub fn order(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> MatRef<'_, f64> {
        self.mat.as_ref()
    }

    /// Cached spectral decomposition; eigenvalues ascending, vectors as columns.
    pub fn eigen(&self) -> &(Vec<f64>, Mat<f64>) {
        self.eigen.get_or_init(|| {
            let evd = self
                .mat
                .self_adjoint_eigen(Side::Lower)
                .expect("self-adjoint eigendecomposition failed");
            let values: Vec<f64> = (0..self.order()).map(|i| evd.S()[i]).collect();
            (values, evd.U().to_owned())
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen().0
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0f64, |m, &l| m.max(l.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.order()).map(|i| self.mat[(i, i)]).sum()
    }

    /// Trace of the inverse via Cholesky; errors if not positive definite.
    pub fn trace_inverse(&self) -> Result<f64> {
        let llt = self
            .mat
            .llt(Side::Lower)
            .map_err(|_| Error::SingularSystem("Cholesky failed in trace_inverse".into()))?;
        let inv = llt.inverse();
        Ok((0..self.order()).map(|i| inv[(i, i)]).sum())
    }

    /// Principal square root through the spectral decomposition.
    ///
    /// Eigenvalues in `(-1e-10 ||A||, 0)` are clamped to zero; anything lower is
    /// reported as a not-PSD error rather than silently repaired.
    pub fn psd_sqrt(&self) -> Result<DenseSpd> {
        let (values, vectors) = self.eigen();
        let norm = self.spectral_norm();
        let threshold = PSD_CLAMP * norm;
        let mut roots = Vec::with_capacity(values.len());
        for &l in values {
            if l < -threshold {
                return Err(Error::NotPsd { min_eigenvalue: l, threshold: -threshold });
            }
            roots.push(l.max(0.0).sqrt());
        }
        // B = U diag(sqrt(l)) U^T
        let n = self.order();
        let mut scaled = vectors.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[(i, j)] *= roots[j];
            }
        }
        let b = &scaled * vectors.transpose();
        // Symmetrize away roundoff from the two matmuls.
        let sym = Mat::from_fn(n, n, |i, j| 0.5 * (b[(i, j)] + b[(j, i)]));
        Ok(DenseSpd { mat: sym, eigen: OnceLock::new() })
    }

    /// Solve `(A + shift I) x = rhs` by Cholesky.
    pub fn solve_shifted(&self, rhs: &[f64], shift: f64) -> Result<Vec<f64>> {
        let n = self.order();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch("rhs length".into()));
        }
        let shifted = Mat::from_fn(n, n, |i, j| self.mat[(i, j)] + if i == j { shift } else { 0.0 });
        let llt = shifted
            .llt(Side::Lower)
            .map_err(|_| Error::SingularSystem("Cholesky failed in solve_shifted".into()))?;
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let x = llt.solve(b.as_ref());
        Ok((0..n).map(|i| x[(i, 0)]).collect())
    }

    /// Diagonal of `U^T B U` where `U` are this matrix's eigenvectors: the
    /// projection of `B` onto this matrix's eigenbasis, one entry per mode.
    pub fn diag_in_eigenbasis(&self, b: &DenseSpd) -> Result<Vec<f64>> {
        if b.order() != self.order() {
            return Err(Error::DimensionMismatch("diag_in_eigenbasis order".into()));
        }
        let (_, u) = self.eigen();
        let w = b.mat() * u.as_ref();
        let n = self.order();
        Ok((0..n)
            .map(|t| (0..n).map(|i| u[(i, t)] * w[(i, t)]).sum())
            .collect())
    }

    /// Frobenius norm of the difference `A - B C`.
    pub fn residual_product(&self, b: &DenseSpd, c: &DenseSpd) -> f64 {
        let prod = b.mat() * c.mat();
        let mut num = 0f64;
        let mut den = 0f64;
        for j in 0..self.order() {
            for i in 0..self.order() {
                num += (self.mat[(i, j)] - prod[(i, j)]).powi(2);
                den += self.mat[(i, j)].powi(2);
            }
        }
        (num / den).sqrt()
    }
}

/// Conjugate both kernels by `M^{1/2}`: the weighted-loss-to-isotropic-loss map
/// `K <- M^{1/2} K M^{1/2}`, `K' <- M^{1/2} K' M^{1/2}`.
///
/// Choosing `M = K'^{-1}` turns the second output into the identity, which is
/// the minimum-mean-squared-error weighting.
pub fn weighted_loss_transform(
    k: &DenseSpd,
    k_prime: &DenseSpd,
    m: &DenseSpd,
) -> Result<(DenseSpd, DenseSpd)> {
    let n = k.order();
    if k_prime.order() != n || m.order() != n {
        return Err(Error::DimensionMismatch("weighted_loss_transform orders".into()));
    }
    let m_sqrt = m.psd_sqrt()?;
    let conj = |a: &DenseSpd| -> Result<DenseSpd> {
        let t = m_sqrt.mat() * a.mat();
        let p = &t * m_sqrt.mat();
        let sym = Mat::from_fn(n, n, |i, j| 0.5 * (p[(i, j)] + p[(j, i)]));
        DenseSpd::new(sym)
    };
    Ok((conj(k)?, conj(k_prime)?))
}

/// Dense inverse via Cholesky.
pub fn spd_inverse(a: &DenseSpd) -> Result<DenseSpd> {
    let llt = a
        .mat()
        .llt(Side::Lower)
        .map_err(|_| Error::SingularSystem("Cholesky failed in spd_inverse".into()))?;
    let inv = llt.inverse();
    let n = a.order();
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (inv[(i, j)] + inv[(j, i)]));
    DenseSpd::new(sym)
}
