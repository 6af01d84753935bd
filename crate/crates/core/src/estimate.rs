//! Moment-matching estimation of `λ(t)` and `σ²(t)` from multi-path data,
//! plus the closed-form maximum-likelihood estimator for constant rates.
//!
//! Pipeline: logit-transform every path relative to its own start, take the
//! cross-path mean `μ_j` and lag-one covariance `ν_j`, interpolate both with
//! natural cubic splines, and differentiate the splines analytically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulate::{PathSet, Space, TimeGrid};
pub use crate::spline::SplineCurve;

pub const DEFAULT_CLIP_EPS: f64 = 1e-9;

/// Logit-transformed paths plus the number of values clipped on the way.
#[derive(Debug, Clone)]
pub struct Transformed<T> {
    pub paths: PathSet<T>,
    pub clips: usize,
}

/// Maps `X`-space paths to `y_ij = ln[x_ij(K − x_i1) / (x_i1(K − x_ij))]`.
///
/// With `clip_eps = Some(ε)` values are first clipped into `[εK, (1 − ε)K]`
/// and counted. Values outside `[0, K]` are always an error.
pub fn transform_paths<T: Scalar>(paths: &PathSet<T>, k: T, clip_eps: Option<T>) -> Result<Transformed<T>> {
    if paths.space() != Space::X {
        return Err(Error::InvalidParameter("transform expects X-space paths".into()));
    }
    if !(k > T::zero()) {
        return Err(Error::InvalidParameter(format!("K must be positive, got {k}")));
    }
    let (lo, hi) = match clip_eps {
        Some(e) => (e * k, (T::one() - e) * k),
        None => (T::zero(), k),
    };
    let mut clips = 0usize;
    let mut rows = Vec::with_capacity(paths.d());
    for (i, row) in paths.paths().enumerate() {
        let mut clipped = Vec::with_capacity(row.len());
        for (j, &x) in row.iter().enumerate() {
            if !(x >= T::zero() && x <= k) {
                return Err(Error::Domain {
                    what: if j == 0 { "x_i1" } else { "x_ij" },
                    value: x.as_f64(),
                    lo: 0.0,
                    hi: k.as_f64(),
                });
            }
            let c = if x < lo {
                clips += 1;
                lo
            } else if x > hi {
                clips += 1;
                hi
            } else {
                x
            };
            if !(c > T::zero() && c < k) {
                return Err(Error::Domain {
                    what: "x_ij",
                    value: x.as_f64(),
                    lo: 0.0,
                    hi: k.as_f64(),
                });
            }
            clipped.push(c);
        }
        let x1 = clipped[0];
        let base = ((k - x1) / x1).ln();
        let y: Vec<T> = clipped
            .iter()
            .enumerate()
            .map(|(j, &x)| if j == 0 { T::zero() } else { (x / (k - x)).ln() + base })
            .collect();
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite transform {bad} on path {}", i + 1)));
        }
        rows.push(y);
    }
    let mut out = PathSet::from_rows(*paths.grid(), rows, Space::Y, k)?;
    out.seed = paths.seed;
    out.saturated = paths.saturated;
    Ok(Transformed { paths: out, clips })
}

fn require_y<T: Scalar>(y: &PathSet<T>) -> Result<()> {
    if y.space() == Space::Y {
        Ok(())
    } else {
        Err(Error::InvalidParameter("expected Y-space paths".into()))
    }
}

/// Cross-path means `μ_j`, `j = 1..n`.
pub fn sample_mean<T: Scalar>(y: &PathSet<T>) -> Result<Vec<T>> {
    require_y(y)?;
    let d = T::from_usize_lossy(y.d());
    let mut mu = vec![T::zero(); y.n()];
    for row in y.paths() {
        for (m, &v) in mu.iter_mut().zip(row) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= d);
    Ok(mu)
}

/// Lag-one sample covariances `ν_j = cov(Y(t_{j−1}), Y(t_j))`, `j = 2..n`.
pub fn sample_lag_cov<T: Scalar>(y: &PathSet<T>) -> Result<Vec<T>> {
    require_y(y)?;
    if y.d() < 2 {
        return Err(Error::InsufficientData(
            "lag covariance needs at least two paths".into(),
        ));
    }
    let mu = sample_mean(y)?;
    let n = y.n();
    let mut nu = vec![T::zero(); n - 1];
    for row in y.paths() {
        for j in 1..n {
            nu[j - 1] += (row[j] - mu[j]) * (row[j - 1] - mu[j - 1]);
        }
    }
    let denom = T::from_usize_lossy(y.d() - 1);
    nu.iter_mut().for_each(|v| *v /= denom);
    Ok(nu)
}

/// Interpolated mean curve `M̂(t)` and covariance curve `Σ̂(t)`.
#[derive(Debug, Clone)]
pub struct MomentCurves<T> {
    pub mean: SplineCurve<T>,
    pub cov: SplineCurve<T>,
}

fn thinned(len: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

/// Splines through `(t_j, μ_j)` and `(t_{j−1}, ν_j)`, keeping every
/// `stride`-th point (and always the last one).
pub fn fit_moment_curves<T: Scalar>(
    mu: &[T],
    nu: &[T],
    grid: &TimeGrid<T>,
    stride: usize,
) -> Result<MomentCurves<T>> {
    if stride < 1 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    if mu.len() != grid.n() || nu.len() + 1 != grid.n() {
        return Err(Error::InvalidParameter(format!(
            "moment lengths ({}, {}) do not match grid size {}",
            mu.len(),
            nu.len(),
            grid.n()
        )));
    }
    let mean_idx = thinned(mu.len(), stride);
    let cov_idx = thinned(nu.len(), stride);
    if mean_idx.len() < 3 || cov_idx.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} knots retained; need at least 3",
            mean_idx.len().min(cov_idx.len())
        )));
    }
    let tm: Vec<T> = mean_idx.iter().map(|&j| grid.time(j)).collect();
    let vm: Vec<T> = mean_idx.iter().map(|&j| mu[j]).collect();
    // ν_j estimates V(t_{j−1}|t0), so ν[q] sits at grid time q.
    let tc: Vec<T> = cov_idx.iter().map(|&q| grid.time(q)).collect();
    let vc: Vec<T> = cov_idx.iter().map(|&q| nu[q]).collect();
    Ok(MomentCurves {
        mean: SplineCurve::natural(&tm, &vm)?,
        cov: SplineCurve::natural(&tc, &vc)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleEstimate<T> {
    pub lambda: T,
    pub sigma2: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Fraction of grid points where the raw `σ̂²` is negative.
    pub negative_sigma2_fraction: f64,
    /// Values clipped into `[εK, (1 − ε)K]` before transforming.
    pub clip_count: usize,
    /// Simulated values that had rounded onto the boundary.
    pub saturated_count: usize,
    /// Derivatives on these end intervals lean on the natural end condition.
    pub low_confidence: Vec<(f64, f64)>,
}

/// Fitted rate curves on the observation grid.
#[derive(Debug, Clone)]
pub struct EstimateResult<T> {
    pub times: Vec<T>,
    pub lambda_hat: Vec<T>,
    pub sigma2_raw: Vec<T>,
    pub sigma2_floored: Vec<T>,
    pub mu: Vec<T>,
    pub nu: Vec<T>,
    pub curves: MomentCurves<T>,
    pub mle: Option<MleEstimate<T>>,
    pub diagnostics: Diagnostics,
}

impl<T: Scalar> EstimateResult<T> {
    pub fn lambda_at(&self, t: T) -> T {
        self.curves.mean.derivative(t)
    }

    pub fn sigma2_at(&self, t: T) -> T {
        self.curves.cov.derivative(t)
    }

    /// `(1/(b − a))∫_a^b λ̂`, exact from the mean spline.
    pub fn mean_lambda_over(&self, a: T, b: T) -> T {
        (self.curves.mean.eval(b) - self.curves.mean.eval(a)) / (b - a)
    }

    /// `(1/(b − a))∫_a^b σ̂²`, exact from the covariance spline.
    pub fn mean_sigma2_over(&self, a: T, b: T) -> T {
        (self.curves.cov.eval(b) - self.curves.cov.eval(a)) / (b - a)
    }
}

/// Differentiates the fitted curves on every grid time.
pub fn estimate_rates<T: Scalar>(
    curves: MomentCurves<T>,
    grid: &TimeGrid<T>,
    mu: Vec<T>,
    nu: Vec<T>,
) -> EstimateResult<T> {
    let times = grid.times();
    let lambda_hat: Vec<T> = times.iter().map(|&t| curves.mean.derivative(t)).collect();
    let sigma2_raw: Vec<T> = times.iter().map(|&t| curves.cov.derivative(t)).collect();
    let sigma2_floored: Vec<T> = sigma2_raw.iter().map(|&v| v.max(T::zero())).collect();
    let negatives = sigma2_raw.iter().filter(|&&v| v < T::zero()).count();

    let mut low_confidence = Vec::new();
    for spline in [&curves.mean, &curves.cov] {
        let k = spline.knots();
        low_confidence.push((k[0].as_f64(), k[1].as_f64()));
        low_confidence.push((k[k.len() - 2].as_f64(), grid.end().as_f64()));
    }
    low_confidence.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    low_confidence.dedup();

    EstimateResult {
        times,
        lambda_hat,
        sigma2_raw,
        sigma2_floored,
        mu,
        nu,
        curves,
        mle: None,
        diagnostics: Diagnostics {
            negative_sigma2_fraction: negatives as f64 / grid.n() as f64,
            clip_count: 0,
            saturated_count: 0,
            low_confidence,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions<T> {
    pub stride: usize,
    pub clip_eps: Option<T>,
    pub with_mle: bool,
}

impl<T: Scalar> Default for EstimateOptions<T> {
    fn default() -> Self {
        EstimateOptions {
            stride: 1,
            clip_eps: Some(T::lit(DEFAULT_CLIP_EPS)),
            with_mle: false,
        }
    }
}

/// Full pipeline from `Y`-space paths.
pub fn estimate_from_y<T: Scalar>(y: &PathSet<T>, opts: &EstimateOptions<T>) -> Result<EstimateResult<T>> {
    let mu = sample_mean(y)?;
    let nu = sample_lag_cov(y)?;
    let curves = fit_moment_curves(&mu, &nu, y.grid(), opts.stride)?;
    let mut result = estimate_rates(curves, y.grid(), mu, nu);
    if opts.with_mle {
        result.mle = Some(mle_homogeneous(y, y.grid().delta())?);
    }
    result.diagnostics.saturated_count = y.saturated;
    Ok(result)
}

/// Full pipeline from `X`-space paths with carrying capacity `k`.
pub fn estimate_gmm<T: Scalar>(x: &PathSet<T>, k: T, opts: &EstimateOptions<T>) -> Result<EstimateResult<T>> {
    let tr = transform_paths(x, k, opts.clip_eps)?;
    let mut result = estimate_from_y(&tr.paths, opts)?;
    result.diagnostics.clip_count = tr.clips;
    Ok(result)
}

/// Closed-form MLE of constant `(λ, σ²)` from Gaussian increments.
///
/// The variance estimator centres each increment at `λ̂Δ`.
pub fn mle_homogeneous<T: Scalar>(y: &PathSet<T>, delta: T) -> Result<MleEstimate<T>> {
    require_y(y)?;
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {delta}")));
    }
    let count = T::from_usize_lossy(y.d() * (y.n() - 1));
    let scale = count * delta;
    let total: T = y.paths().map(|row| row[row.len() - 1] - row[0]).sum();
    let lambda = total / scale;
    let centre = lambda * delta;
    let mut ss = T::zero();
    for row in y.paths() {
        for w in row.windows(2) {
            let r = w[1] - w[0] - centre;
            ss += r * r;
        }
    }
    Ok(MleEstimate {
        lambda,
        sigma2: ss / scale,
    })
}

/// Gaussian increment log-likelihood of constant `(λ, σ²)`.
pub fn log_likelihood<T: Scalar>(y: &PathSet<T>, lambda: T, sigma2: T, delta: T) -> Result<T> {
    require_y(y)?;
    if !(sigma2 > T::zero()) {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {delta}")));
    }
    let m = T::from_usize_lossy(y.d() * (y.n() - 1));
    let two = T::lit(2.0);
    let centre = lambda * delta;
    let mut ss = T::zero();
    for row in y.paths() {
        for w in row.windows(2) {
            let r = w[1] - w[0] - centre;
            ss += r * r;
        }
    }
    Ok(-m / two * (two * T::PI() * delta).ln() - m / two * sigma2.ln() - ss / (two * sigma2 * delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::TimeGrid;

    fn y_set(grid: TimeGrid<f64>, rows: Vec<Vec<f64>>) -> PathSet<f64> {
        PathSet::from_rows(grid, rows, Space::Y, 200.0).unwrap()
    }

    #[test]
    fn transform_examples() {
        let grid = TimeGrid::<f64>::new(0.0, 1.0, 3).unwrap();
        let x = PathSet::from_rows(grid, vec![vec![20.0, 100.0, 150.0], vec![50.0, 60.0, 70.0]], Space::X, 200.0).unwrap();
        let tr = transform_paths(&x, 200.0, Some(1e-9)).unwrap();
        assert_eq!(tr.clips, 0);
        assert_eq!(tr.paths.column(0), vec![0.0, 0.0]);
        assert!((tr.paths.value(0, 1) - 9f64.ln()).abs() < 1e-12);
        for i in 0..2 {
            for j in 0..3 {
                let back = crate::model::y_to_x(tr.paths.value(i, j), x.value(i, 0), 200.0).unwrap();
                assert!((back - x.value(i, j)).abs() < 1e-12 * 200.0);
            }
        }
    }

    #[test]
    fn transform_clips_and_rejects() {
        let grid = TimeGrid::<f64>::new(0.0, 1.0, 3).unwrap();
        let x = PathSet::from_rows(grid, vec![vec![20.0, 200.0 - 1e-10, 1e-12]], Space::X, 200.0).unwrap();
        let tr = transform_paths(&x, 200.0, Some(1e-9)).unwrap();
        assert_eq!(tr.clips, 2);
        assert!(tr.paths.values().iter().all(|v: &f64| v.is_finite()));
        // Same paths judged against a smaller K fall outside [0, K].
        assert!(matches!(transform_paths(&x, 150.0, Some(1e-9)), Err(Error::Domain { .. })));
        let y = tr.paths;
        assert!(transform_paths(&y, 200.0, None).is_err());
    }

    #[test]
    fn sample_mean_examples() {
        let grid = TimeGrid::<f64>::new(0.0, 1.0, 4).unwrap();
        let single = y_set(grid, vec![vec![0.0, 0.3, -0.1, 0.9]]);
        assert_eq!(sample_mean(&single).unwrap(), vec![0.0, 0.3, -0.1, 0.9]);
        let c = y_set(grid, vec![vec![0.0, 2.5, 2.5, 2.5]; 5]);
        let mu = sample_mean(&c).unwrap();
        assert_eq!(mu[0], 0.0);
        assert!(mu[1..].iter().all(|&m| (m - 2.5).abs() < 1e-15));
    }

    #[test]
    fn lag_cov_examples() {
        let grid = TimeGrid::<f64>::new(0.0, 1.0, 3).unwrap();
        let same = y_set(grid, vec![vec![0.0, 1.0, 2.0]; 4]);
        assert!(sample_lag_cov(&same).unwrap().iter().all(|&v| v == 0.0));
        // Mirrored pair: deviations ±(0, 1, 3) → ν_2 = (1·0 + 1·0)/1 = 0, ν_3 = (3·1 + 3·1)/1 = 6.
        let mirrored = y_set(grid, vec![vec![0.0, 1.0, 3.0], vec![0.0, -1.0, -3.0]]);
        assert_eq!(sample_lag_cov(&mirrored).unwrap(), vec![0.0, 6.0]);
        let one = y_set(grid, vec![vec![0.0, 1.0, 2.0]]);
        assert!(matches!(sample_lag_cov(&one), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn affine_data_gives_exact_rates() {
        let grid = TimeGrid::<f64>::new(0.0, 0.01, 5001).unwrap();
        let mu: Vec<f64> = grid.times().iter().map(|t| 0.4 * t).collect();
        let nu: Vec<f64> = grid.times()[..5000].iter().map(|t| 0.1 * t).collect();
        for stride in [1usize, 7, 100] {
            let curves = fit_moment_curves(&mu, &nu, &grid, stride).unwrap();
            for (t, m) in grid.times().iter().zip(&mu) {
                assert!((curves.mean.eval(*t) - m).abs() <= 1e-12 * m.abs().max(1.0));
            }
            let est = estimate_rates(curves, &grid, mu.clone(), nu.clone());
            assert!(est.lambda_hat.iter().all(|v| (v - 0.4).abs() < 1e-8));
            assert!(est.sigma2_raw.iter().all(|v| (v - 0.1).abs() < 1e-10));
            assert_eq!(est.diagnostics.negative_sigma2_fraction, 0.0);
        }
    }

    #[test]
    fn fit_needs_three_knots() {
        let grid = TimeGrid::<f64>::new(0.0, 1.0, 4).unwrap();
        let mu = [0.0, 1.0, 2.0, 3.0];
        let nu = [0.0, 1.0, 2.0];
        assert!(fit_moment_curves(&mu, &nu, &grid, 1).is_ok());
        assert!(fit_moment_curves(&mu, &nu, &grid, 3).is_err());
        assert!(fit_moment_curves(&mu, &nu, &grid, 0).is_err());
        assert!(fit_moment_curves(&mu[..3], &nu, &grid, 1).is_err());
    }

    #[test]
    fn floored_variant() {
        let grid = TimeGrid::<f64>::new(0.0, 1.0, 6).unwrap();
        let mu = vec![0.0; 6];
        let nu = vec![0.0, 1.0, 0.5, 0.2, 0.9];
        let curves = fit_moment_curves(&mu, &nu, &grid, 1).unwrap();
        let est = estimate_rates(curves, &grid, mu, nu);
        assert!(est.diagnostics.negative_sigma2_fraction > 0.0);
        for (r, f) in est.sigma2_raw.iter().zip(&est.sigma2_floored) {
            assert!(*f >= 0.0);
            if *r >= 0.0 {
                assert_eq!(r, f);
            }
        }
    }

    #[test]
    fn mle_zero_residuals() {
        let grid = TimeGrid::<f64>::new(0.0, 0.01, 101).unwrap();
        let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..101).map(|j| 0.4 * 0.01 * j as f64).collect()).collect();
        let y = y_set(grid, rows);
        let mle = mle_homogeneous(&y, 0.01).unwrap();
        assert!((mle.lambda - 0.4).abs() < 1e-12);
        assert!(mle.sigma2 < 1e-20);
        assert!(mle_homogeneous(&y, 0.0).is_err());
        assert!(log_likelihood(&y, 0.4, 0.0, 0.01).is_err());
    }

    fn noisy_rows(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..d)
            .map(|_| {
                let mut y = 0.0;
                let mut row = vec![0.0];
                for _ in 1..n {
                    y += 0.004 + 0.05 * next();
                    row.push(y);
                }
                row
            })
            .collect()
    }

    #[test]
    fn mle_is_the_likelihood_maximum() {
        let grid = TimeGrid::<f64>::new(0.0, 0.01, 200).unwrap();
        let y = y_set(grid, noisy_rows(6, 200, 3));
        let mle = mle_homogeneous(&y, 0.01).unwrap();
        let best = log_likelihood(&y, mle.lambda, mle.sigma2, 0.01).unwrap();
        for i in 0..100 {
            let dl = 0.05 * ((i as f64 * 0.37).sin());
            let ds = 1.0 + 0.3 * ((i as f64 * 0.91).cos());
            let v = log_likelihood(&y, mle.lambda + dl, mle.sigma2 * ds, 0.01).unwrap();
            assert!(v <= best + 1e-9);
        }
        let h = 1e-6;
        let ll = |l: f64, s2: f64| log_likelihood(&y, l, s2, 0.01).unwrap();
        let gl = (ll(mle.lambda + h, mle.sigma2) - ll(mle.lambda - h, mle.sigma2)) / (2.0 * h);
        let gs = (ll(mle.lambda, mle.sigma2 + h) - ll(mle.lambda, mle.sigma2 - h)) / (2.0 * h);
        assert!(gl.hypot(gs) < 1e-4, "gradient ({gl}, {gs})");
    }

    #[test]
    fn likelihood_adds_over_disjoint_paths() {
        let grid = TimeGrid::<f64>::new(0.0, 0.01, 50).unwrap();
        let rows = noisy_rows(6, 50, 9);
        let all = y_set(grid, rows.clone());
        let a = y_set(grid, rows[..2].to_vec());
        let b = y_set(grid, rows[2..].to_vec());
        let sum = log_likelihood(&a, 0.3, 0.2, 0.01).unwrap() + log_likelihood(&b, 0.3, 0.2, 0.01).unwrap();
        assert!((sum - log_likelihood(&all, 0.3, 0.2, 0.01).unwrap()).abs() < 1e-8);
    }
}
