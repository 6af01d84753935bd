//! Numerical integration: adaptive Simpson on finite intervals and
//! Gauss–Hermite rules for integrals against `exp(-z^2)`.

use crate::scalar::Scalar;

/// Adaptive Simpson with absolute tolerance `tol` and recursion cap `max_depth`.
pub fn adaptive_simpson<T, F>(f: F, a: T, b: T, tol: T, max_depth: u32) -> T
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if a == b {
        return T::zero();
    }
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[inline]
fn simpson<T: Scalar>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T, F>(f: &F, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let refined = left + right;
    let diff = refined - whole;
    // Below the rounding floor the difference cannot shrink further.
    let floor = T::lit(64.0) * T::epsilon() * refined.abs();
    if depth == 0 || diff.abs() <= T::lit(15.0) * tol.max(floor) {
        return refined + diff / T::lit(15.0);
    }
    let half_tol = tol / two;
    simpson_step(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
}

/// Largest supported Gauss–Hermite order; beyond it the extreme weights underflow.
pub const MAX_HERMITE_ORDER: usize = 256;

/// Gauss–Hermite rule: `∫ f(z) exp(-z²) dz ≈ Σ wᵢ f(zᵢ)`.
#[derive(Debug, Clone)]
pub struct GaussHermite<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussHermite<T> {
    /// Builds an `n`-point rule, computed in `f64` and narrowed to `T`.
    pub fn new(n: usize) -> Self {
        assert!(
            (1..=MAX_HERMITE_ORDER).contains(&n),
            "Gauss-Hermite order must be in 1..={MAX_HERMITE_ORDER}"
        );
        let (x, w) = hermite_nodes_f64(n);
        GaussHermite {
            nodes: x.into_iter().map(T::lit).collect(),
            weights: w.into_iter().map(T::lit).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

fn hermite_nodes_f64(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Golub–Welsch: nodes are eigenvalues of the Jacobi matrix (zero diagonal,
    // off-diagonal sqrt(k/2)); each is then polished by Newton on the
    // orthonormal recurrence, which also yields the weight.
    let mut x = jacobi_eigenvalues(n);
    x.sort_by(|a, b| b.total_cmp(a));
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        let mut pp = 0.0;
        for _ in 0..8 {
            let (p, d) = orthonormal_hermite(n, *xi);
            pp = d;
            let step = p / d;
            *xi -= step;
            if step.abs() <= 1e-16 * xi.abs().max(1.0) {
                break;
            }
        }
        *wi = 2.0 / (pp * pp);
    }
    (x, w)
}

/// `(h_n(z), sqrt(2n)·h_{n−1}(z))` for the orthonormal Hermite recurrence
/// scaled so that `h_n(z)·e^{−z²/2}` is normalized.
fn orthonormal_hermite(n: usize, z: f64) -> (f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let mut p1 = PIM4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Eigenvalues of the symmetric tridiagonal Hermite Jacobi matrix by
/// implicit QL iteration.
fn jacobi_eigenvalues(n: usize) -> Vec<f64> {
    let mut d = vec![0.0f64; n];
    let mut e: Vec<f64> = (1..=n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 100, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d
}
