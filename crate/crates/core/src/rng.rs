//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, stream, component)`: ChaCha is a
//! counter-mode cipher, so distinct streams are independent and regeneration
//! is order-independent — no global generator state anywhere.

use faer::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Sub-stream roles within one dataset draw.
#[derive(Debug, Clone, Copy)]
pub enum Component {
    Design = 0,
    Noise = 1,
    Teacher = 2,
    TestPoint = 3,
}

/// Independent generator for `(seed, stream, component)`.
pub fn stream_rng(seed: u64, stream: u64, component: Component) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_mul(8).wrapping_add(component as u64));
    rng
}

pub fn standard_normal_vec(rng: &mut ChaCha12Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Column-major matrix of i.i.d. standard normals.
pub fn standard_normal_mat(rng: &mut ChaCha12Rng, nrows: usize, ncols: usize) -> Mat<f64> {
    let mut m = Mat::zeros(nrows, ncols);
    for j in 0..ncols {
        for i in 0..nrows {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Unit vector uniform on the sphere.
pub fn uniform_sphere(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = standard_normal_vec(rng, dim);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
