//! Sample-path generation.
//!
//! Paths are produced exactly: the logit coordinate `Y(t)` is a time-changed
//! Wiener process with known Gaussian increments, so no discretization bias
//! enters. An Euler–Maruyama scheme on the `X`-space SDE is kept as an
//! independent check of that construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{logistic, moments_with_form, DriftForm};
use crate::rates::RatePair;
use crate::scalar::Scalar;

/// Equally spaced observation times `t0, t0 + Δ, …, t0 + (n − 1)Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    t0: T,
    delta: T,
    n: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t0: T, delta: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs n >= 2, got {n}"
            )));
        }
        if !(delta > T::zero() && delta.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time grid step must be positive, got {delta}"
            )));
        }
        Ok(TimeGrid { t0, delta, n })
    }

    /// Grid covering `[t0, t_end]` with step `delta`; `(t_end − t0)/Δ` must be
    /// an integer up to rounding.
    pub fn spanning(t0: T, t_end: T, delta: T) -> Result<Self> {
        if !(delta > T::zero()) || t_end <= t0 {
            return Err(Error::InvalidParameter(format!(
                "cannot span [{t0}, {t_end}] with step {delta}"
            )));
        }
        let steps = ((t_end - t0) / delta).round();
        let rebuilt = t0 + steps * delta;
        if (rebuilt - t_end).abs() > T::lit(1e-6) * delta {
            return Err(Error::InvalidParameter(format!(
                "window length {} is not a multiple of the step {delta}",
                t_end - t0
            )));
        }
        let n = steps.to_usize().ok_or_else(|| {
            Error::InvalidParameter("grid too large".into())
        })? + 1;
        TimeGrid::new(t0, delta, n)
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn end(&self) -> T {
        self.time(self.n - 1)
    }

    #[inline]
    pub fn time(&self, j: usize) -> T {
        self.t0 + self.delta * T::from_usize_lossy(j)
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.n).map(|j| self.time(j)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    X,
    Y,
}

/// `d` paths observed on a common grid, stored row-major (one row per path).
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet<T> {
    grid: TimeGrid<T>,
    values: Vec<T>,
    d: usize,
    space: Space,
    k: T,
    /// Master seed the paths were generated from, if simulated.
    pub seed: Option<u64>,
    /// Values that rounded onto a boundary of `(0, K)` and were nudged inside.
    pub saturated: usize,
}

impl<T: Scalar> PathSet<T> {
    /// Builds a path set from rows; validates shape and the space invariant.
    pub fn from_rows(grid: TimeGrid<T>, rows: Vec<Vec<T>>, space: Space, k: T) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::InsufficientData("path set needs d >= 1".into()));
        }
        let n = grid.n();
        let mut values = Vec::with_capacity(d * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "path {} has {} values, grid has {}",
                    i + 1,
                    row.len(),
                    n
                )));
            }
            values.extend(row);
        }
        let set = PathSet {
            grid,
            values,
            d,
            space,
            k,
            seed: None,
            saturated: 0,
        };
        set.check_space()?;
        Ok(set)
    }

    fn check_space(&self) -> Result<()> {
        match self.space {
            Space::X => {
                for (idx, &v) in self.values.iter().enumerate() {
                    if !(v > T::zero() && v < self.k) {
                        return Err(Error::Domain {
                            what: if idx % self.grid.n() == 0 { "x_i1" } else { "x_ij" },
                            value: v.as_f64(),
                            lo: 0.0,
                            hi: self.k.as_f64(),
                        });
                    }
                }
            }
            Space::Y => {
                for i in 0..self.d {
                    let first = self.path(i)[0];
                    if first != T::zero() {
                        return Err(Error::InvalidParameter(format!(
                            "Y-space path {} does not start at 0",
                            i + 1
                        )));
                    }
                }
                if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!("non-finite Y value {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn path(&self, i: usize) -> &[T] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.n())
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> T {
        self.values[i * self.n() + j]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.d).map(|i| self.value(i, j)).collect()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-path RNG seed, injective in `(replicate, path)` for a fixed master seed.
pub fn derive_path_seed(master_seed: u64, replicate: u32, path: u32) -> u64 {
    let key = (u64::from(replicate) << 32) | u64::from(path);
    mix64(mix64(master_seed) ^ key)
}

fn path_rng(master: u64, replicate: u32, path: usize) -> ChaCha8Rng {
    let path = u32::try_from(path).expect("path index fits in u32");
    ChaCha8Rng::seed_from_u64(derive_path_seed(master, replicate, path))
}

struct Increments<T> {
    mean: Vec<T>,
    sd: Vec<T>,
}

fn exact_increments<T: Scalar>(rates: &RatePair<T>, grid: &TimeGrid<T>) -> Result<Increments<T>> {
    rates.check_window(grid.t0(), grid.end(), 10 * grid.n())?;
    let mean = rates.lambda.increment_table(grid)?;
    let var = rates.sigma2.increment_table(grid)?;
    let mut sd = Vec::with_capacity(var.len());
    for (step, &v) in var.iter().enumerate() {
        let ok = if rates.is_noiseless() { v >= T::zero() } else { v > T::zero() };
        if !ok {
            return Err(Error::NonPositiveNoise {
                step: step + 1,
                value: v.as_f64(),
            });
        }
        sd.push(v.sqrt());
    }
    Ok(Increments { mean, sd })
}

fn y_rows<T>(
    inc: &Increments<T>,
    n: usize,
    d: usize,
    master: u64,
    replicate: u32,
) -> Vec<Vec<T>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
{
    (0..d)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(master, replicate, i);
            let mut row = Vec::with_capacity(n);
            let mut y = T::zero();
            row.push(y);
            for (m, s) in inc.mean.iter().zip(&inc.sd) {
                let z: T = StandardNormal.sample(&mut rng);
                y += *m + *s * z;
                row.push(y);
            }
            row
        })
        .collect()
}

/// Exact simulation in the logit coordinate, returned as `Y`-space paths.
pub fn simulate_exact_y<T>(
    rates: &RatePair<T>,
    grid: &TimeGrid<T>,
    d: usize,
    master_seed: u64,
    replicate: u32,
) -> Result<PathSet<T>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
{
    if d == 0 {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    let inc = exact_increments(rates, grid)?;
    let rows = y_rows(&inc, grid.n(), d, master_seed, replicate);
    let mut set = PathSet::from_rows(*grid, rows, Space::Y, rates.k())?;
    set.seed = Some(master_seed);
    Ok(set)
}

/// Exact simulation of `X(t)` started at `x0`, replicate 0 of `master_seed`.
pub fn simulate_exact<T>(
    rates: &RatePair<T>,
    x0: T,
    grid: &TimeGrid<T>,
    d: usize,
    master_seed: u64,
) -> Result<PathSet<T>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
{
    simulate_exact_replicate(rates, x0, grid, d, master_seed, 0)
}

/// Exact simulation of `X(t)` for one replicate of an experiment.
///
/// Values that round onto `0` or `K` (very large `|Y|`) are moved to the
/// nearest representable interior value and counted in `saturated`.
pub fn simulate_exact_replicate<T>(
    rates: &RatePair<T>,
    x0: T,
    grid: &TimeGrid<T>,
    d: usize,
    master_seed: u64,
    replicate: u32,
) -> Result<PathSet<T>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
{
    let k = rates.k();
    if !(x0 > T::zero() && x0 < k) {
        return Err(Error::Domain {
            what: "x0",
            value: x0.as_f64(),
            lo: 0.0,
            hi: k.as_f64(),
        });
    }
    let y = simulate_exact_y(rates, grid, d, master_seed, replicate)?;
    let top = k * (T::one() - T::epsilon());
    let bottom = k * T::min_positive_value();
    let mut saturated = 0usize;
    let rows: Vec<Vec<T>> = y
        .paths()
        .map(|row| {
            row.iter()
                .map(|&yv| {
                    let x = logistic(yv, x0, k);
                    if x >= k {
                        saturated += 1;
                        top
                    } else if x <= T::zero() {
                        saturated += 1;
                        bottom
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();
    if saturated > 0 {
        log::warn!("{saturated} simulated values saturated at the boundary of (0, K)");
    }
    let mut set = PathSet::from_rows(*grid, rows, Space::X, k)?;
    set.seed = Some(master_seed);
    set.saturated = saturated;
    Ok(set)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmDiagnostics {
    /// Iterates pushed back into `[ε, K − ε]`.
    pub clamp_hits: usize,
    /// Paths with at least one clamp.
    pub clamped_paths: usize,
    pub steps: usize,
}

/// Euler–Maruyama on `dX = A1 dt + √A2 dW` with internal step `Δ/refine`,
/// subsampled to the observation grid. Iterates are clamped into
/// `[ε, K − ε]`, `ε = 1e−9·K`; every clamp is counted.
pub fn simulate_em<T>(
    rates: &RatePair<T>,
    x0: T,
    grid: &TimeGrid<T>,
    refine: usize,
    d: usize,
    master_seed: u64,
) -> Result<(PathSet<T>, EmDiagnostics)>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
{
    let (set, diag) = simulate_em_replicate(rates, x0, grid, refine, d, master_seed, 0, DriftForm::Exact)?;
    if diag.clamp_hits > 0 {
        log::warn!(
            "Euler-Maruyama clamped {} iterates on {} of {} paths",
            diag.clamp_hits,
            diag.clamped_paths,
            d
        );
    }
    Ok((set, diag))
}

/// [`simulate_em`] for one replicate and a chosen drift. Clamps are only
/// counted in the returned diagnostics; callers decide how to report them.
#[allow(clippy::too_many_arguments)]
pub fn simulate_em_replicate<T>(
    rates: &RatePair<T>,
    x0: T,
    grid: &TimeGrid<T>,
    refine: usize,
    d: usize,
    master_seed: u64,
    replicate: u32,
    drift: DriftForm,
) -> Result<(PathSet<T>, EmDiagnostics)>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
{
    if refine < 1 {
        return Err(Error::InvalidParameter("refinement factor must be >= 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    let k = rates.k();
    if !(x0 > T::zero() && x0 < k) {
        return Err(Error::Domain {
            what: "x0",
            value: x0.as_f64(),
            lo: 0.0,
            hi: k.as_f64(),
        });
    }
    rates.check_window(grid.t0(), grid.end(), 10 * grid.n())?;
    let n = grid.n();
    let h = grid.delta() / T::from_usize_lossy(refine);
    let sqrt_h = h.sqrt();
    let eps = T::lit(1e-9) * k;

    let results: Vec<Result<(Vec<T>, usize)>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(master_seed, replicate, i);
            let mut row = Vec::with_capacity(n);
            let mut x = x0;
            let mut hits = 0usize;
            row.push(x);
            for j in 1..n {
                let start = grid.time(j - 1);
                for s in 0..refine {
                    let t = start + h * T::from_usize_lossy(s);
                    let (a1, a2) = moments_with_form(x, t, rates, drift)?;
                    let z: T = StandardNormal.sample(&mut rng);
                    let next = x + a1 * h + a2.sqrt() * sqrt_h * z;
                    if !next.is_finite() {
                        return Err(Error::Numerical(format!(
                            "Euler-Maruyama iterate became {next} on path {} at t = {t} (x = {x})",
                            i + 1
                        )));
                    }
                    x = if next < eps {
                        hits += 1;
                        eps
                    } else if next > k - eps {
                        hits += 1;
                        k - eps
                    } else {
                        next
                    };
                }
                row.push(x);
            }
            Ok((row, hits))
        })
        .collect();

    let mut rows = Vec::with_capacity(d);
    let mut diag = EmDiagnostics {
        steps: (n - 1) * refine * d,
        ..Default::default()
    };
    for r in results {
        let (row, hits) = r?;
        diag.clamp_hits += hits;
        diag.clamped_paths += usize::from(hits > 0);
        rows.push(row);
    }
    let mut set = PathSet::from_rows(*grid, rows, Space::X, k)?;
    set.seed = Some(master_seed);
    Ok((set, diag))
}
