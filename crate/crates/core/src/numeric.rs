//! Small numerical utilities: root bracketing/bisection, Richardson-extrapolated
//! finite differences, polynomial least squares, and monotone cubic interpolation.

use crate::real::Real;

/// Root of a monotone increasing function on `[lo, hi]` by bisection.
///
/// Runs until the bracket collapses to floating-point adjacency, so the result
/// is accurate to machine precision relative to the root scale. Assumes
/// `f(lo) <= 0 <= f(hi)`.
pub fn bisect_increasing<R: Real>(mut lo: R, mut hi: R, mut f: impl FnMut(R) -> R) -> R {
    let half = R::of(0.5);
    for _ in 0..4096 {
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < R::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    half * (lo + hi)
}

/// Geometric bisection for a monotone *decreasing* function of a positive
/// variable: returns `x` with `f(x) = target`, bracketing on `[lo, hi]`.
pub fn bisect_decreasing_log<R: Real>(
    mut lo: R,
    mut hi: R,
    target: R,
    mut f: impl FnMut(R) -> R,
) -> R {
    for _ in 0..4096 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

/// Centered finite difference with one Richardson extrapolation level.
///
/// `h` is the outer step; the estimate combines steps `h` and `h/2` to cancel
/// the leading O(h^2) truncation term.
pub fn richardson_diff<R: Real>(mut f: impl FnMut(R) -> R, x: R, h: R) -> R {
    let two = R::of(2.0);
    let half = h / two;
    let d_h = (f(x + h) - f(x - h)) / (two * h);
    let d_h2 = (f(x + half) - f(x - half)) / h;
    (R::of(4.0) * d_h2 - d_h) / R::of(3.0)
}

/// Evaluate a polynomial `c[0] + c[1] x + ... + c[n] x^n` by Horner's rule.
pub fn horner<R: Real>(coeffs: &[R], x: R) -> R {
    let mut acc = R::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Derivative coefficients of a polynomial in the `horner` convention.
pub fn poly_derivative<R: Real>(coeffs: &[R]) -> Vec<R> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| R::of(k as f64) * c)
        .collect()
}

/// Least-squares polynomial fit of the given degree through `(x, y)` samples.
///
/// Solves the normal equations by Gaussian elimination with partial pivoting;
/// adequate for the low degrees (<= 8) used here.
pub fn polyfit<R: Real>(xs: &[R], ys: &[R], degree: usize) -> Vec<R> {
    assert!(xs.len() == ys.len() && xs.len() > degree);
    let m = degree + 1;
    // Accumulate X^T X and X^T y for the Vandermonde design.
    let mut ata = vec![R::zero(); m * m];
    let mut aty = vec![R::zero(); m];
    for (&x, &y) in xs.iter().zip(ys) {
        let mut pow = vec![R::one(); m];
        for k in 1..m {
            pow[k] = pow[k - 1] * x;
        }
        for i in 0..m {
            aty[i] += pow[i] * y;
            for j in 0..m {
                ata[i * m + j] += pow[i] * pow[j];
            }
        }
    }
    solve_dense_small(&mut ata, &mut aty, m);
    aty
}

/// In-place Gaussian elimination with partial pivoting on a small system.
fn solve_dense_small<R: Real>(a: &mut [R], b: &mut [R], n: usize) {
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[piv * n + col].abs() {
                piv = row;
            }
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            for j in col..n {
                let upper = a[col * n + j];
                a[row * n + j] = a[row * n + j] - f * upper;
            }
            b[row] = b[row] - f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in col + 1..n {
            acc = acc - a[col * n + j] * b[j];
        }
        b[col] = acc / a[col * n + col];
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson limiting).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MonotoneCubic<R> {
    pub xs: Vec<R>,
    pub ys: Vec<R>,
    pub slopes: Vec<R>,
}

impl<R: Real> MonotoneCubic<R> {
    pub fn fit(xs: &[R], ys: &[R]) -> Self {
        let n = xs.len();
        assert!(n >= 2);
        let mut d = vec![R::zero(); n - 1];
        for i in 0..n - 1 {
            d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        }
        let mut m = vec![R::zero(); n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= R::zero() {
                m[i] = R::zero();
            } else {
                m[i] = R::of(0.5) * (d[i - 1] + d[i]);
            }
        }
        // Fritsch-Carlson clamp keeps the interpolant monotone on each interval.
        for i in 0..n - 1 {
            if d[i] == R::zero() {
                m[i] = R::zero();
                m[i + 1] = R::zero();
                continue;
            }
            let a = m[i] / d[i];
            let b = m[i + 1] / d[i];
            let s = (a * a + b * b).sqrt();
            if s > R::of(3.0) {
                let tau = R::of(3.0) / s;
                m[i] = tau * a * d[i];
                m[i + 1] = tau * b * d[i];
            }
        }
        Self { xs: xs.to_vec(), ys: ys.to_vec(), slopes: m }
    }

    fn segment(&self, x: R) -> usize {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0;
        }
        if x >= self.xs[n - 1] {
            return n - 2;
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn value(&self, x: R) -> R {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = R::of(2.0);
        let three = R::of(3.0);
        let h00 = two * t3 - three * t2 + R::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }

    pub fn derivative(&self, x: R) -> R {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let two = R::of(2.0);
        let three = R::of(3.0);
        let six = R::of(6.0);
        let dh00 = (six * t2 - six * t) / h;
        let dh10 = (three * t2 - R::of(4.0) * t + R::one()) / h;
        let dh01 = (six * t - six * t2) / h;
        let dh11 = (three * t2 - two * t) / h;
        dh00 * self.ys[i] + dh10 * h * self.slopes[i] + dh01 * self.ys[i + 1] + dh11 * h * self.slopes[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt() {
        let root = bisect_increasing(0.0f64, 10.0, |x| x * x - 2.0);
        assert!((root - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn richardson_matches_analytic() {
        let d = richardson_diff(|x: f64| x.exp() * x.sin(), 0.7, 1e-4);
        let exact = 0.7f64.exp() * (0.7f64.sin() + 0.7f64.cos());
        assert!((d - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn polyfit_recovers_cubic() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 1.0 - 2.0 * x + 0.5 * x * x * x).collect();
        let c = polyfit(&xs, &ys, 3);
        assert!((c[0] - 1.0).abs() < 1e-10);
        assert!((c[1] + 2.0).abs() < 1e-9);
        assert!(c[2].abs() < 1e-9);
        assert!((c[3] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let xs: Vec<f64> = vec![0.0, 0.1, 0.4, 0.5, 0.9, 1.0];
        let ys: Vec<f64> = vec![1.0, 1.1, 1.2, 2.0, 5.0, 9.0];
        let pc = MonotoneCubic::fit(&xs, &ys);
        let mut prev = pc.value(0.0);
        for i in 1..=200 {
            let x = i as f64 / 200.0;
            let v = pc.value(x);
            assert!(v >= prev - 1e-12, "not monotone at {x}");
            prev = v;
        }
    }
}
