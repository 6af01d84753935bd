//! Replicated simulate-then-estimate runs and their summaries: mean relative
//! errors, pointwise mean ± sd bands, box-plot statistics and kernel density
//! curves of standardized estimates.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::write_atomic;
use crate::error::{Error, Result};
use crate::estimate::{estimate_gmm, EstimateOptions, DEFAULT_CLIP_EPS};
use crate::rates::{RateFunction, RatePair};
use crate::model::DriftForm;
use crate::simulate::{derive_path_seed, simulate_em_replicate, simulate_exact_replicate, TimeGrid};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gmm,
    Mle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gmm => "GMM",
            Method::Mle => "MLE",
        }
    }
}

/// Path generator for each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Simulator {
    /// Exact Gaussian increments in the logit coordinate.
    #[default]
    Exact,
    /// Euler–Maruyama with `refine` internal steps per observation interval.
    EulerMaruyama {
        refine: usize,
        #[serde(default)]
        drift: DriftForm,
    },
}

/// Divisor used for pointwise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdConvention {
    /// Divide by `N`.
    #[default]
    Population,
    /// Divide by `N − 1`.
    Unbiased,
}

fn default_x0() -> f64 {
    20.0
}
fn default_k() -> f64 {
    200.0
}
fn default_t_end() -> f64 {
    50.0
}
fn default_delta() -> f64 {
    0.01
}
fn default_paths() -> usize {
    50
}
fn default_replicates() -> usize {
    100
}
fn default_methods() -> Vec<Method> {
    vec![Method::Gmm]
}
fn default_stride() -> usize {
    1
}
fn default_clip() -> Option<f64> {
    Some(DEFAULT_CLIP_EPS)
}
fn default_min_truth() -> f64 {
    0.05
}

/// One Monte Carlo experiment. Field names are the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub lambda: RateFunction<f64>,
    pub sigma2: RateFunction<f64>,
    #[serde(default = "default_x0")]
    pub x0: f64,
    #[serde(rename = "K", default = "default_k")]
    pub k: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(rename = "T", default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Paths per replicate (`d`).
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Number of replicates (`N`).
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Interior window for scalar summaries; defaults to `[t0 + 2, T − 2]`.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default = "default_clip")]
    pub clip_eps: Option<f64>,
    /// Grid points where `|truth|` is below this fraction of its largest
    /// magnitude on the window are skipped in relative errors.
    #[serde(default = "default_min_truth")]
    pub min_rel_truth: f64,
    #[serde(default)]
    pub sd_convention: SdConvention,
    #[serde(default)]
    pub simulator: Simulator,
}

impl ExperimentConfig {
    /// Desk-scale defaults around the given truth.
    pub fn new(name: &str, lambda: RateFunction<f64>, sigma2: RateFunction<f64>, seed: u64) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            lambda,
            sigma2,
            x0: default_x0(),
            k: default_k(),
            t0: 0.0,
            t_end: default_t_end(),
            delta: default_delta(),
            paths: default_paths(),
            replicates: default_replicates(),
            seed,
            methods: default_methods(),
            stride: default_stride(),
            window: None,
            clip_eps: default_clip(),
            min_rel_truth: default_min_truth(),
            sd_convention: SdConvention::Population,
            simulator: Simulator::Exact,
        }
    }

    pub fn window(&self) -> (f64, f64) {
        match self.window {
            Some([a, b]) => (a, b),
            None => (self.t0 + 2.0, self.t_end - 2.0),
        }
    }

    pub fn grid(&self) -> Result<TimeGrid<f64>> {
        TimeGrid::spanning(self.t0, self.t_end, self.delta)
    }

    pub fn rates(&self) -> Result<RatePair<f64>> {
        RatePair::new(self.lambda.clone(), self.sigma2.clone(), self.k)
    }

    fn homogeneous_truth(&self) -> Option<(f64, f64)> {
        Some((self.lambda.as_constant()?, self.sigma2.as_constant()?))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{}: {m}", self.name)));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return bad("name must be non-empty and use [A-Za-z0-9_-]".into());
        }
        if self.replicates < 1 {
            return bad("replicates must be >= 1".into());
        }
        if self.paths < 2 {
            return bad("paths must be >= 2 (lag covariance)".into());
        }
        if self.methods.is_empty() {
            return bad("methods must be non-empty".into());
        }
        if self.methods.contains(&Method::Mle) && self.homogeneous_truth().is_none() {
            return bad("MLE requires constant lambda and sigma2".into());
        }
        if !(self.x0 > 0.0 && self.x0 < self.k) {
            return bad(format!("x0 = {} outside (0, K)", self.x0));
        }
        if matches!(self.simulator, Simulator::EulerMaruyama { refine: 0, .. }) {
            return bad("refine must be >= 1".into());
        }
        if self.stride < 1 {
            return bad("stride must be >= 1".into());
        }
        let (a, b) = self.window();
        if !(a >= self.t0 && b <= self.t_end && a < b) {
            return bad(format!("window [{a}, {b}] not inside [{}, {}]", self.t0, self.t_end));
        }
        self.grid()?;
        self.rates()?;
        Ok(())
    }
}

/// A file holding several experiments, e.g. the rows of an error table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub experiments: Vec<ExperimentConfig>,
}

/// Per-replicate output.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub index: usize,
    /// Seed of the replicate's first path.
    pub first_path_seed: u64,
    pub lambda_curve: Vec<f64>,
    pub sigma2_curve: Vec<f64>,
    /// Window averages of the GMM curves.
    pub gmm_lambda: f64,
    pub gmm_sigma2: f64,
    pub mle: Option<(f64, f64)>,
    pub clips: usize,
    pub saturated: usize,
    /// Euler–Maruyama iterates pushed back inside `(0, K)`.
    pub clamp_hits: usize,
    pub negative_sigma2_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MreRow {
    pub method: Method,
    pub mre_lambda: f64,
    pub mre_sigma2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    pub bandwidth: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub times: Vec<f64>,
    pub lambda_truth: Vec<f64>,
    pub sigma2_truth: Vec<f64>,
    pub replicates: Vec<ReplicateOutcome>,
    pub mre: Vec<MreRow>,
    pub lambda_band: Option<Band>,
    pub sigma2_band: Option<Band>,
    pub boxplots: Vec<(Method, &'static str, BoxplotStats)>,
    pub kdes: Vec<(Method, &'static str, KdeCurve)>,
    pub runtime: Duration,
}

impl ExperimentReport {
    pub fn mre_for(&self, method: Method) -> Option<&MreRow> {
        self.mre.iter().find(|r| r.method == method)
    }

    pub fn gmm_scalars(&self) -> (Vec<f64>, Vec<f64>) {
        self.replicates.iter().map(|r| (r.gmm_lambda, r.gmm_sigma2)).unzip()
    }

    pub fn mle_scalars(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.replicates.iter().map(|r| r.mle).collect::<Option<Vec<_>>>().map(|v| v.into_iter().unzip())
    }

    pub fn total_saturated(&self) -> usize {
        self.replicates.iter().map(|r| r.saturated).sum()
    }
}

/// Runs all replicates (in parallel) and aggregates in replicate order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let started = Instant::now();
    let grid = config.grid()?;
    let rates = config.rates()?;
    let times = grid.times();
    let (wa, wb) = config.window();
    let opts = EstimateOptions {
        stride: config.stride,
        clip_eps: config.clip_eps,
        with_mle: config.methods.contains(&Method::Mle),
    };

    let replicates: Vec<ReplicateOutcome> = (0..config.replicates)
        .into_par_iter()
        .map(|r| -> Result<ReplicateOutcome> {
            let rep = u32::try_from(r).map_err(|_| Error::Config("too many replicates".into()))?;
            let wrap = |e: Error| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            };
            let (x, clamp_hits) = match config.simulator {
                Simulator::Exact => {
                    simulate_exact_replicate(&rates, config.x0, &grid, config.paths, config.seed, rep).map(|p| (p, 0))
                }
                Simulator::EulerMaruyama { refine, drift } => simulate_em_replicate(
                    &rates,
                    config.x0,
                    &grid,
                    refine,
                    config.paths,
                    config.seed,
                    rep,
                    drift,
                )
                .map(|(p, dg)| (p, dg.clamp_hits)),
            }
            .map_err(wrap)?;
            let est = estimate_gmm(&x, config.k, &opts).map_err(wrap)?;
            Ok(ReplicateOutcome {
                index: r,
                first_path_seed: derive_path_seed(config.seed, rep, 0),
                gmm_lambda: est.mean_lambda_over(wa, wb),
                gmm_sigma2: est.mean_sigma2_over(wa, wb),
                mle: est.mle.map(|m| (m.lambda, m.sigma2)),
                clips: est.diagnostics.clip_count,
                saturated: est.diagnostics.saturated_count,
                clamp_hits,
                negative_sigma2_fraction: est.diagnostics.negative_sigma2_fraction,
                lambda_curve: est.lambda_hat,
                sigma2_curve: est.sigma2_raw,
            })
        })
        .collect::<Result<_>>()?;

    let lambda_truth = truth_curve(&config.lambda, &times)?;
    let sigma2_truth = truth_curve(&config.sigma2, &times)?;

    let mut mre_rows = Vec::new();
    let mut boxplots = Vec::new();
    let mut kdes = Vec::new();
    let homogeneous = config.homogeneous_truth();

    for &method in &config.methods {
        let (lam_vals, s2_vals): (Vec<f64>, Vec<f64>) = match method {
            Method::Gmm => replicates.iter().map(|r| (r.gmm_lambda, r.gmm_sigma2)).unzip(),
            Method::Mle => replicates
                .iter()
                .map(|r| r.mle.expect("MLE requested"))
                .unzip(),
        };
        let row = match (method, homogeneous) {
            (_, Some((lam, s2))) => MreRow {
                method,
                mre_lambda: mre(&lam_vals, lam)?,
                mre_sigma2: mre(&s2_vals, s2)?,
            },
            (Method::Gmm, None) => {
                let lc: Vec<&[f64]> = replicates.iter().map(|r| r.lambda_curve.as_slice()).collect();
                let sc: Vec<&[f64]> = replicates.iter().map(|r| r.sigma2_curve.as_slice()).collect();
                MreRow {
                    method,
                    mre_lambda: mre_curves(&lc, &lambda_truth, &times, (wa, wb), config.min_rel_truth)?,
                    mre_sigma2: mre_curves(&sc, &sigma2_truth, &times, (wa, wb), config.min_rel_truth)?,
                }
            }
            (Method::Mle, None) => unreachable!("validated"),
        };
        mre_rows.push(row);

        for (param, vals) in [("lambda", &lam_vals), ("sigma2", &s2_vals)] {
            if vals.len() >= 5 {
                boxplots.push((method, param, boxplot_stats(vals)?));
            }
            if vals.len() >= 10 {
                match standardize(vals).and_then(|z| kde(&z, KDE_POINTS)) {
                    Ok(curve) => kdes.push((method, param, curve)),
                    Err(e) => log::warn!("{}: no density for {} {param}: {e}", config.name, method.as_str()),
                }
            }
        }
    }

    let (lambda_band, sigma2_band) = if replicates.len() >= 2 {
        let lc: Vec<&[f64]> = replicates.iter().map(|r| r.lambda_curve.as_slice()).collect();
        let sc: Vec<&[f64]> = replicates.iter().map(|r| r.sigma2_curve.as_slice()).collect();
        (
            Some(pointwise_band(&lc, config.sd_convention)?),
            Some(pointwise_band(&sc, config.sd_convention)?),
        )
    } else {
        (None, None)
    };

    let report = ExperimentReport {
        config: config.clone(),
        times,
        lambda_truth,
        sigma2_truth,
        replicates,
        mre: mre_rows,
        lambda_band,
        sigma2_band,
        boxplots,
        kdes,
        runtime: started.elapsed(),
    };
    let saturated = report.total_saturated();
    if saturated > 0 {
        log::warn!("{}: {saturated} simulated values saturated at K", config.name);
    }
    let clamps: usize = report.replicates.iter().map(|r| r.clamp_hits).sum();
    if clamps > 0 {
        log::warn!(
            "{}: Euler-Maruyama clamped {clamps} iterates across {} replicates",
            config.name,
            config.replicates
        );
    }
    log::info!("{}: {} replicates in {:.2?}", config.name, config.replicates, report.runtime);
    Ok(report)
}

fn truth_curve(f: &RateFunction<f64>, times: &[f64]) -> Result<Vec<f64>> {
    times.iter().map(|&t| f.eval(t)).collect()
}

/// Mean relative error `(1/N) Σ |v_i − truth| / |truth|`.
pub fn mre(values: &[f64], truth: f64) -> Result<f64> {
    if truth == 0.0 {
        return Err(Error::InvalidParameter("relative error undefined for zero truth".into()));
    }
    if values.is_empty() {
        return Err(Error::InsufficientData("no estimates".into()));
    }
    Ok(values.iter().map(|v| (v - truth).abs()).sum::<f64>() / (truth.abs() * values.len() as f64))
}

/// Replicate-averaged time-mean of `|est(t) − truth(t)| / |truth(t)|` over
/// the grid points in `window`, skipping points where `|truth|` is below
/// `min_rel_truth` times its largest magnitude on the window.
pub fn mre_curves(
    curves: &[&[f64]],
    truth: &[f64],
    times: &[f64],
    window: (f64, f64),
    min_rel_truth: f64,
) -> Result<f64> {
    let inside: Vec<usize> = (0..times.len())
        .filter(|&j| times[j] >= window.0 && times[j] <= window.1)
        .collect();
    let scale = inside.iter().map(|&j| truth[j].abs()).fold(0.0, f64::max);
    let idx: Vec<usize> = inside
        .into_iter()
        .filter(|&j| truth[j].abs() > 0.0 && truth[j].abs() >= min_rel_truth * scale)
        .collect();
    if idx.is_empty() || curves.is_empty() {
        return Err(Error::InsufficientData("no usable points for relative error".into()));
    }
    let per: f64 = curves
        .iter()
        .map(|c| idx.iter().map(|&j| (c[j] - truth[j]).abs() / truth[j].abs()).sum::<f64>() / idx.len() as f64)
        .sum();
    Ok(per / curves.len() as f64)
}

/// Pointwise mean, standard deviation and mean ± sd of `N ≥ 2` curves.
pub fn pointwise_band(curves: &[&[f64]], convention: SdConvention) -> Result<Band> {
    let n_curves = curves.len();
    if n_curves < 2 {
        return Err(Error::InsufficientData("band needs at least two curves".into()));
    }
    let len = curves[0].len();
    if curves.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidParameter("curves of unequal length".into()));
    }
    let divisor = match convention {
        SdConvention::Population => n_curves as f64,
        SdConvention::Unbiased => (n_curves - 1) as f64,
    };
    let mut mean = vec![0.0; len];
    for c in curves {
        for (m, v) in mean.iter_mut().zip(c.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_curves as f64);
    let mut sd = vec![0.0; len];
    for c in curves {
        for ((s, v), m) in sd.iter_mut().zip(c.iter()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    sd.iter_mut().for_each(|s| *s = (*s / divisor).sqrt());
    let lower = mean.iter().zip(&sd).map(|(m, s)| m - s).collect();
    let upper = mean.iter().zip(&sd).map(|(m, s)| m + s).collect();
    Ok(Band { mean, sd, lower, upper })
}

/// Five-number summary with quartiles interpolated between order statistics
/// and the points beyond 1.5·IQR from the box.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.len() < 5 {
        return Err(Error::InsufficientData("box plot needs at least 5 values".into()));
    }
    let s = stats::sorted(values);
    let q1 = stats::quantile_sorted(&s, 0.25);
    let q3 = stats::quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    Ok(BoxplotStats {
        min: s[0],
        q1,
        median: stats::quantile_sorted(&s, 0.5),
        q3,
        max: s[s.len() - 1],
        outliers: s.iter().copied().filter(|&v| v < lo || v > hi).collect(),
    })
}

/// `(v − mean) / sd` with the sample standard deviation.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InsufficientData("need at least two values".into()));
    }
    let m = stats::mean(values);
    let sd = stats::variance(values).sqrt();
    if !(sd > 0.0) {
        return Err(Error::InvalidParameter("zero variance".into()));
    }
    Ok(values.iter().map(|v| (v - m) / sd).collect())
}

pub const KDE_POINTS: usize = 1024;

/// Silverman's rule `0.9·min(sd, IQR/1.34)·N^{−1/5}`.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let s = stats::sorted(values);
    let sd = stats::variance(values).sqrt();
    let iqr = stats::quantile_sorted(&s, 0.75) - stats::quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (values.len() as f64).powf(-0.2)
}

/// Gaussian kernel density on `points` equally spaced abscissae spanning the
/// data range extended by five bandwidths on each side.
pub fn kde(values: &[f64], points: usize) -> Result<KdeCurve> {
    if values.len() < 10 {
        return Err(Error::InsufficientData("density estimate needs at least 10 values".into()));
    }
    if stats::variance(values) <= 0.0 {
        return Err(Error::InvalidParameter("zero variance".into()));
    }
    let h = silverman_bandwidth(values);
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (a, b) = (lo - 5.0 * h, hi + 5.0 * h);
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let x: Vec<f64> = (0..points).map(|i| a + (b - a) * i as f64 / (points - 1) as f64).collect();
    let density = x
        .iter()
        .map(|&xi| {
            norm * values
                .iter()
                .map(|&v| {
                    let u = (xi - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(KdeCurve { bandwidth: h, x, density })
}

// ---------------------------------------------------------------------------
// Report files

fn f(v: f64) -> String {
    format!("{v}")
}

fn truth_label(r: &RateFunction<f64>) -> String {
    r.label()
}

/// Writes `table1.csv`, `boxplot.csv`, `kde.csv`, and per experiment
/// `bands_<name>.csv` and `estimates_<name>.csv` into `dir`. Every file starts
/// with the metadata line `header`.
pub fn write_reports(reports: &[ExperimentReport], dir: &Path, header: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut table = format!("{header}\nexperiment,method,lambda,sigma2,d,N,mre_lambda,mre_sigma2\n");
    let mut boxes = format!("{header}\nexperiment,method,parameter,min,q1,median,q3,max,n_outliers\n");
    let mut dens = format!("{header}\nexperiment,method,parameter,bandwidth,x,density\n");

    for rep in reports {
        let c = &rep.config;
        for row in &rep.mre {
            let _ = writeln!(
                table,
                "{},{},{},{},{},{},{},{}",
                c.name,
                row.method.as_str(),
                truth_label(&c.lambda),
                truth_label(&c.sigma2),
                c.paths,
                c.replicates,
                f(row.mre_lambda),
                f(row.mre_sigma2)
            );
        }
        for (m, p, b) in &rep.boxplots {
            let _ = writeln!(
                boxes,
                "{},{},{p},{},{},{},{},{},{}",
                c.name,
                m.as_str(),
                f(b.min),
                f(b.q1),
                f(b.median),
                f(b.q3),
                f(b.max),
                b.outliers.len()
            );
        }
        for (m, p, k) in &rep.kdes {
            for (x, y) in k.x.iter().zip(&k.density) {
                let _ = writeln!(dens, "{},{},{p},{},{},{}", c.name, m.as_str(), f(k.bandwidth), f(*x), f(*y));
            }
        }

        if let (Some(lb), Some(sb)) = (&rep.lambda_band, &rep.sigma2_band) {
            let mut bands = format!(
                "{header}\nt,lambda_true,lambda_mean,lambda_sd,lambda_lower,lambda_upper,\
                 sigma2_true,sigma2_mean,sigma2_sd,sigma2_lower,sigma2_upper\n"
            );
            for j in 0..rep.times.len() {
                let _ = writeln!(
                    bands,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    f(rep.times[j]),
                    f(rep.lambda_truth[j]),
                    f(lb.mean[j]),
                    f(lb.sd[j]),
                    f(lb.lower[j]),
                    f(lb.upper[j]),
                    f(rep.sigma2_truth[j]),
                    f(sb.mean[j]),
                    f(sb.sd[j]),
                    f(sb.lower[j]),
                    f(sb.upper[j])
                );
            }
            write_atomic(&dir.join(format!("bands_{}.csv", c.name)), bands.as_bytes())?;
        }

        let mut est = format!(
            "{header}\nreplicate,first_path_seed,gmm_lambda,gmm_sigma2,mle_lambda,mle_sigma2,clips,saturated,clamp_hits,negative_sigma2_fraction\n"
        );
        for r in &rep.replicates {
            let (ml, ms) = r.mle.map(|(a, b)| (f(a), f(b))).unwrap_or_default();
            let _ = writeln!(
                est,
                "{},{},{},{},{ml},{ms},{},{},{},{}",
                r.index + 1,
                r.first_path_seed,
                f(r.gmm_lambda),
                f(r.gmm_sigma2),
                r.clips,
                r.saturated,
                r.clamp_hits,
                f(r.negative_sigma2_fraction)
            );
        }
        write_atomic(&dir.join(format!("estimates_{}.csv", c.name)), est.as_bytes())?;
    }
    write_atomic(&dir.join("table1.csv"), table.as_bytes())?;
    write_atomic(&dir.join("boxplot.csv"), boxes.as_bytes())?;
    write_atomic(&dir.join("kde.csv"), dens.as_bytes())?;
    Ok(())
}
