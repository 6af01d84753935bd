//! File formats and real-data preparation.
//!
//! Case series: a wide CSV `time,<loc1>,...,<locL>` of incident counts plus a
//! `location,population` CSV. Path sets: `t,path_1,...,path_d` with a JSON
//! sidecar. Estimates: `t,lambda_hat,sigma2_hat_raw,sigma2_hat_floored` with
//! a JSON sidecar. Lines starting with `#` are metadata and skipped on read.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimate::{Diagnostics, EstimateResult, MleEstimate, DEFAULT_CLIP_EPS};
use crate::model::logistic;
use crate::rates::RateFunction;
use crate::simulate::{PathSet, Space, TimeGrid};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SIDIFF_OUT_DIR";

/// Default inflation applied by [`suggest_k`].
pub const SUGGEST_K_FACTOR: f64 = 1.05;

/// Relative tolerance when checking that observation times are equally spaced.
const SPACING_TOL: f64 = 1e-6;

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Short SHA-256 fingerprint of a serialized configuration.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// `# config-hash=<h>, seed=<s>, version=<v>`.
pub fn metadata_header(config_hash: &str, seed: Option<u64>) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!(
        "# config-hash={config_hash}, seed={seed}, version={}",
        env!("CARGO_PKG_VERSION")
    )
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn parse_cell(path: &Path, line: usize, column: &str, cell: &str) -> Result<f64> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("column `{column}`: `{cell}` is not a finite number"),
        })
}

// ---------------------------------------------------------------------------
// Case series

/// Incident counts per location on common observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeriesTable {
    pub times: Vec<f64>,
    pub locations: Vec<String>,
    /// One column of counts per location.
    pub counts: Vec<Vec<f64>>,
    pub populations: Vec<f64>,
}

impl RawSeriesTable {
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 2 {
            return Err(Error::InsufficientData("need at least two observation times".into()));
        }
        if self.locations.is_empty() || self.counts.len() != self.locations.len() {
            return Err(Error::InvalidParameter("one count column per location required".into()));
        }
        if self.populations.len() != self.locations.len() {
            return Err(Error::InvalidParameter("one population per location required".into()));
        }
        for (loc, col) in self.locations.iter().zip(&self.counts) {
            if col.len() != n {
                return Err(Error::InvalidParameter(format!("location {loc}: column length differs")));
            }
            if let Some(j) = col.iter().position(|c| !(*c >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "location {loc}: negative count at time {}",
                    self.times[j]
                )));
            }
        }
        if let Some(i) = self.populations.iter().position(|p| !(*p > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "location {}: population must be positive",
                self.locations[i]
            )));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("times must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Reads the wide counts file and the population file.
pub fn load_csv(cases: &Path, populations: &Path) -> Result<RawSeriesTable> {
    let pops = load_populations(populations)?;

    let mut rdr = reader(cases)?;
    let headers = rdr.headers().map_err(|e| csv_error(cases, e))?.clone();
    if headers.len() < 2 || &headers[0] != "time" {
        return Err(Error::Parse {
            path: cases.to_path_buf(),
            line: 1,
            msg: "header must be `time,<loc1>,...,<locL>`".into(),
        });
    }
    let locations: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut seen_loc = HashSet::new();
    for l in &locations {
        if !seen_loc.insert(l) {
            return Err(Error::Parse {
                path: cases.to_path_buf(),
                line: 1,
                msg: format!("duplicate location `{l}`"),
            });
        }
    }
    let populations = locations
        .iter()
        .map(|l| {
            pops.get(l)
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("missing population for location `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut times = Vec::new();
    let mut counts = vec![Vec::new(); locations.len()];
    let mut seen_time = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(cases, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let t = parse_cell(cases, line, "time", &rec[0])?;
        if !seen_time.insert(t.to_bits()) {
            return Err(Error::Parse {
                path: cases.to_path_buf(),
                line,
                msg: format!("duplicate time {t}"),
            });
        }
        times.push(t);
        for (c, col) in counts.iter_mut().enumerate() {
            let v = parse_cell(cases, line, &locations[c], &rec[c + 1])?;
            if v < 0.0 {
                return Err(Error::Parse {
                    path: cases.to_path_buf(),
                    line,
                    msg: format!("negative count {v} for `{}`", locations[c]),
                });
            }
            col.push(v);
        }
    }
    let table = RawSeriesTable {
        times,
        locations,
        counts,
        populations,
    };
    table.validate()?;
    Ok(table)
}

fn load_populations(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "location" || &headers[1] != "population" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "header must be `location,population`".into(),
        });
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let p = parse_cell(path, line, "population", &rec[1])?;
        if !(p > 0.0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("population must be positive, got {p}"),
            });
        }
        if out.insert(rec[0].to_string(), p).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("duplicate location `{}`", &rec[0]),
            });
        }
    }
    Ok(out)
}

/// Writes a table in the format read by [`load_csv`].
pub fn write_series_csv(table: &RawSeriesTable, cases: &Path, populations: &Path) -> Result<()> {
    table.validate()?;
    let mut s = String::from("time");
    for l in &table.locations {
        let _ = write!(s, ",{l}");
    }
    s.push('\n');
    for (j, t) in table.times.iter().enumerate() {
        let _ = write!(s, "{t}");
        for col in &table.counts {
            let _ = write!(s, ",{}", col[j]);
        }
        s.push('\n');
    }
    write_atomic(cases, s.as_bytes())?;
    let mut p = String::from("location,population\n");
    for (l, v) in table.locations.iter().zip(&table.populations) {
        let _ = writeln!(p, "{l},{v}");
    }
    write_atomic(populations, p.as_bytes())
}

/// Denominator used to turn cumulative counts into fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each location by its own population.
    #[default]
    PerLocation,
    /// Every location by the largest population.
    GlobalMax,
}

/// How observation times become model time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    /// `t = 0, 1, 2, …` by row.
    #[default]
    Index,
    /// The values of the `time` column, which must be equally spaced.
    Calendar,
}

fn default_analysis_clip() -> Option<f64> {
    Some(DEFAULT_CLIP_EPS)
}
fn default_analysis_stride() -> usize {
    1
}

/// Settings for the real-data pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default = "default_analysis_clip")]
    pub clip_eps: Option<f64>,
    #[serde(default = "default_analysis_stride")]
    pub stride: usize,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub time_unit: TimeUnit,
    /// Keep only observations with model time inside `[a, b]`.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

impl AnalysisConfig {
    pub fn new(k: f64) -> Self {
        AnalysisConfig {
            k,
            clip_eps: default_analysis_clip(),
            stride: 1,
            normalization: Normalization::PerLocation,
            time_unit: TimeUnit::Index,
            window: None,
        }
    }
}

/// Normalized cumulative paths and how many zero values were lifted to `εK`.
#[derive(Debug, Clone)]
pub struct Cumulated {
    pub paths: PathSet<f64>,
    pub clips: usize,
}

/// Running sums of incident counts divided by population, one path per
/// location. Zero values are lifted to `εK` and counted; a value at or above
/// `K` is an error since it means `K` was chosen too small.
pub fn cumulate_normalize(table: &RawSeriesTable, cfg: &AnalysisConfig) -> Result<Cumulated> {
    table.validate()?;
    if !(cfg.k > 0.0) {
        return Err(Error::InvalidParameter(format!("K must be positive, got {}", cfg.k)));
    }
    let model_times: Vec<f64> = match cfg.time_unit {
        TimeUnit::Index => (0..table.times.len()).map(|j| j as f64).collect(),
        TimeUnit::Calendar => table.times.clone(),
    };
    let keep: Vec<usize> = match cfg.window {
        Some([a, b]) => (0..model_times.len())
            .filter(|&j| model_times[j] >= a && model_times[j] <= b)
            .collect(),
        None => (0..model_times.len()).collect(),
    };
    if keep.len() < 3 {
        return Err(Error::InsufficientData("fewer than three observations in window".into()));
    }
    let kept: Vec<f64> = keep.iter().map(|&j| model_times[j]).collect();
    let grid = uniform_grid(&kept)?;

    let global = table.populations.iter().copied().fold(0.0, f64::max);
    let floor = cfg.clip_eps.unwrap_or(DEFAULT_CLIP_EPS) * cfg.k;
    let mut clips = 0;
    let mut rows = Vec::with_capacity(table.locations.len());
    for (l, col) in table.counts.iter().enumerate() {
        let denom = match cfg.normalization {
            Normalization::PerLocation => table.populations[l],
            Normalization::GlobalMax => global,
        };
        let mut cum = 0.0;
        let full: Vec<f64> = col
            .iter()
            .map(|c| {
                cum += c;
                cum / denom
            })
            .collect();
        let mut row = Vec::with_capacity(keep.len());
        for &j in &keep {
            let v = full[j];
            if v >= cfg.k {
                return Err(Error::InvalidParameter(format!(
                    "location {}: normalized value {v} at t={} is not below K={}; choose a larger K",
                    table.locations[l], model_times[j], cfg.k
                )));
            }
            row.push(if v <= 0.0 {
                clips += 1;
                floor
            } else {
                v
            });
        }
        rows.push(row);
    }
    if clips > 0 {
        log::warn!("{clips} zero cumulative values lifted to {floor}");
    }
    Ok(Cumulated {
        paths: PathSet::from_rows(grid, rows, Space::X, cfg.k)?,
        clips,
    })
}

fn uniform_grid(times: &[f64]) -> Result<TimeGrid<f64>> {
    if times.len() < 2 {
        return Err(Error::InsufficientData("need at least two times".into()));
    }
    let delta = times[1] - times[0];
    for (j, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - delta).abs() > SPACING_TOL * delta.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "times are not equally spaced near index {}",
                j + 1
            )));
        }
    }
    TimeGrid::new(times[0], delta, times.len())
}

/// Rough carrying capacity: the largest observation times [`SUGGEST_K_FACTOR`].
/// Only a starting point; the analysis always takes `K` from the user.
pub fn suggest_k(paths: &PathSet<f64>) -> f64 {
    paths.values().iter().copied().fold(f64::NEG_INFINITY, f64::max) * SUGGEST_K_FACTOR
}

// ---------------------------------------------------------------------------
// Path sets

/// Metadata stored next to a path CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathsMeta {
    #[serde(rename = "K")]
    pub k: f64,
    pub space: Space,
    pub seed: Option<u64>,
    pub x0: Option<f64>,
    pub lambda: Option<RateFunction<f64>>,
    pub sigma2: Option<RateFunction<f64>>,
    pub saturated: usize,
}

fn paths_csv(paths: &PathSet<f64>, header: &str) -> String {
    let mut s = String::with_capacity(paths.d() * paths.n() * 20);
    let _ = writeln!(s, "{header}");
    s.push('t');
    for i in 1..=paths.d() {
        let _ = write!(s, ",path_{i}");
    }
    s.push('\n');
    for (j, t) in paths.grid().times().iter().enumerate() {
        let _ = write!(s, "{t}");
        for i in 0..paths.d() {
            let _ = write!(s, ",{}", paths.value(i, j));
        }
        s.push('\n');
    }
    s
}

/// Writes `t,path_1,...,path_d` plus the JSON sidecar.
pub fn write_paths(path: &Path, paths: &PathSet<f64>, meta: &PathsMeta, header: &str) -> Result<()> {
    write_atomic(path, paths_csv(paths, header).as_bytes())?;
    let js = serde_json::to_string_pretty(meta).map_err(|e| Error::Numerical(e.to_string()))?;
    write_atomic(&sidecar_path(path), js.as_bytes())
}

/// Reads a path CSV; `k` overrides the sidecar when given. Without either
/// the call fails since `K` cannot be inferred from the values.
pub fn read_paths(path: &Path, k: Option<f64>) -> Result<(PathSet<f64>, Option<PathsMeta>)> {
    let meta: Option<PathsMeta> = match std::fs::read_to_string(sidecar_path(path)) {
        Ok(s) => Some(serde_json::from_str(&s).map_err(|e| Error::Parse {
            path: sidecar_path(path),
            line: e.line(),
            msg: e.to_string(),
        })?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(sidecar_path(path), e)),
    };
    let space = meta.as_ref().map_or(Space::X, |m| m.space);
    let k = k
        .or(meta.as_ref().map(|m| m.k))
        .ok_or_else(|| Error::Config("K not given and no sidecar found".into()))?;

    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let d = headers.len().saturating_sub(1);
    let expected = (1..=d).all(|i| headers[i] == format!("path_{i}"));
    if d == 0 || &headers[0] != "t" || !expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "header must be `t,path_1,...,path_d`".into(),
        });
    }
    let mut times = Vec::new();
    let mut rows = vec![Vec::new(); d];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        times.push(parse_cell(path, line, "t", &rec[0])?);
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(parse_cell(path, line, &headers[i + 1], &rec[i + 1])?);
        }
    }
    let grid = uniform_grid(&times)?;
    let mut set = PathSet::from_rows(grid, rows, space, k)?;
    set.seed = meta.as_ref().and_then(|m| m.seed);
    Ok((set, meta))
}

// ---------------------------------------------------------------------------
// Estimates

/// Metadata stored next to an estimate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    #[serde(rename = "K")]
    pub k: f64,
    pub stride: usize,
    pub d: usize,
    pub mle: Option<MleEstimate<f64>>,
    pub diagnostics: Diagnostics,
    /// Advisory carrying capacity from the data, when computed.
    pub suggested_k: Option<f64>,
}

/// Writes `t,lambda_hat,sigma2_hat_raw,sigma2_hat_floored` plus the sidecar.
pub fn write_estimate(path: &Path, est: &EstimateResult<f64>, meta: &EstimateMeta, header: &str) -> Result<()> {
    let mut s = format!("{header}\nt,lambda_hat,sigma2_hat_raw,sigma2_hat_floored\n");
    for j in 0..est.times.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            est.times[j], est.lambda_hat[j], est.sigma2_raw[j], est.sigma2_floored[j]
        );
    }
    write_atomic(path, s.as_bytes())?;
    let js = serde_json::to_string_pretty(meta).map_err(|e| Error::Numerical(e.to_string()))?;
    write_atomic(&sidecar_path(path), js.as_bytes())
}

/// Columns of an estimate CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimateTable {
    pub t: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub sigma2_raw: Vec<f64>,
    pub sigma2_floored: Vec<f64>,
}

pub fn read_estimate(path: &Path) -> Result<EstimateTable> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let want = ["t", "lambda_hat", "sigma2_hat_raw", "sigma2_hat_floored"];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("header must be `{}`", want.join(",")),
        });
    }
    let mut out = EstimateTable::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let v: Vec<f64> = (0..4)
            .map(|c| parse_cell(path, line, want[c], &rec[c]))
            .collect::<Result<_>>()?;
        out.t.push(v[0]);
        out.lambda_hat.push(v[1]);
        out.sigma2_raw.push(v[2]);
        out.sigma2_floored.push(v[3]);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Synthetic measles-shaped series

/// Shape of the synthetic case series produced by [`measles_like_fixture`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub locations: usize,
    pub periods: usize,
    /// Cumulative fractions approach this level from below.
    pub plateau: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            locations: 20,
            periods: 546,
            plateau: 0.24,
            seed: 20_240_101,
        }
    }
}

/// Twenty-location, biweekly-style incidence with a fast early epidemic
/// phase that dies out: each location follows a logistic curve in `Y`-space
/// with transmission `0.01 + 0.3·e^{−t/10}` plus Brownian noise of decaying
/// intensity, and incidence is Poisson around the resulting increments.
pub fn measles_like_fixture(spec: &FixtureSpec) -> Result<RawSeriesTable> {
    if spec.locations == 0 || spec.periods < 3 || !(spec.plateau > 0.0 && spec.plateau < 1.0) {
        return Err(Error::InvalidParameter("invalid fixture shape".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lambda = |t: f64| 0.01 + 0.3 * (-t / 10.0).exp();
    let sigma2 = |t: f64| 0.002 + 0.02 * (-t / 10.0).exp();
    let mut counts = Vec::with_capacity(spec.locations);
    let mut populations = Vec::with_capacity(spec.locations);
    for _ in 0..spec.locations {
        let pop = (rng.random_range(5e4..5e5_f64)).round();
        let x0 = rng.random_range(0.002..0.01_f64);
        let mut y = 0.0;
        let mut prev = x0;
        let mut col = Vec::with_capacity(spec.periods);
        let first = Poisson::new(pop * x0).map_err(|e| Error::Numerical(e.to_string()))?;
        col.push(first.sample(&mut rng).max(1.0));
        for j in 1..spec.periods {
            let t = (j - 1) as f64 + 0.5;
            let z: f64 = StandardNormal.sample(&mut rng);
            y += lambda(t) + sigma2(t).sqrt() * z;
            let x = logistic(y, x0, spec.plateau);
            let mean = pop * (x - prev).max(0.0);
            prev = prev.max(x);
            let c = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::Numerical(e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            col.push(c);
        }
        // Poisson noise must not push the cumulative fraction past the plateau.
        let cap = spec.plateau * pop;
        let mut cum = 0.0;
        for c in col.iter_mut() {
            if cum + *c >= cap {
                *c = (cap - cum - 1.0).max(0.0).floor();
            }
            cum += *c;
        }
        counts.push(col);
        populations.push(pop);
    }
    let table = RawSeriesTable {
        times: (0..spec.periods).map(|j| 1944.0 + j as f64 * 2.0 / 52.0).collect(),
        locations: (1..=spec.locations).map(|l| format!("loc{l:02}")).collect(),
        counts,
        populations,
    };
    table.validate()?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_well_formed_file() {
        let d = tmp();
        let c = write(d.path(), "c.csv", "# note\ntime,a,b\n0,2,1\n1,3,0\n2,5,4\n");
        let p = write(d.path(), "p.csv", "location,population\nb,50\na,100\n");
        let t = load_csv(&c, &p).unwrap();
        assert_eq!(t.times, vec![0.0, 1.0, 2.0]);
        assert_eq!(t.locations, vec!["a", "b"]);
        assert_eq!(t.counts[0], vec![2.0, 3.0, 5.0]);
        assert_eq!(t.populations, vec![100.0, 50.0]);
    }

    #[test]
    fn rejects_bad_inputs_with_lines() {
        let d = tmp();
        let p = write(d.path(), "p.csv", "location,population\na,100\n");
        let neg = write(d.path(), "n.csv", "time,a\n0,2\n1,-3\n");
        match load_csv(&neg, &p).unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("negative"));
            }
            e => panic!("{e}"),
        }
        let nan = write(d.path(), "x.csv", "time,a\n0,2\n1,abc\n");
        assert!(matches!(load_csv(&nan, &p).unwrap_err(), Error::Parse { line: 3, .. }));
        let dup = write(d.path(), "d.csv", "time,a\n0,2\n0,3\n");
        assert!(matches!(load_csv(&dup, &p).unwrap_err(), Error::Parse { line: 3, .. }));
        let missing = write(d.path(), "m.csv", "time,a,b\n0,2,1\n1,3,1\n");
        assert!(load_csv(&missing, &p).unwrap_err().to_string().contains("missing population"));
        assert!(matches!(
            load_csv(&d.path().join("nope.csv"), &p).unwrap_err(),
            Error::Io { .. }
        ));
    }

    #[test]
    fn series_round_trip_is_bit_exact() {
        let d = tmp();
        let t = RawSeriesTable {
            times: vec![0.1, 0.2 + 1e-17, 1.0 / 3.0],
            locations: vec!["x".into(), "y".into()],
            counts: vec![vec![1.0, 2.5, 3.0], vec![0.0, 1e-300, 7.0]],
            populations: vec![123.456, 1e6],
        };
        let (c, p) = (d.path().join("c.csv"), d.path().join("p.csv"));
        write_series_csv(&t, &c, &p).unwrap();
        assert_eq!(load_csv(&c, &p).unwrap(), t);
    }

    #[test]
    fn cumulation_examples() {
        let t = RawSeriesTable {
            times: vec![0.0, 1.0, 2.0],
            locations: vec!["a".into(), "b".into()],
            counts: vec![vec![2.0, 3.0, 5.0], vec![4.0, 0.0, 0.0]],
            populations: vec![100.0, 200.0],
        };
        let c = cumulate_normalize(&t, &AnalysisConfig::new(0.25)).unwrap();
        let a = c.paths.path(0);
        for (v, e) in a.iter().zip([0.02, 0.05, 0.10]) {
            assert!((v - e).abs() < 1e-15);
        }
        assert_eq!(c.paths.path(1), &[0.02, 0.02, 0.02]);
        assert_eq!(c.clips, 0);

        let mut g = AnalysisConfig::new(0.25);
        g.normalization = Normalization::GlobalMax;
        let c = cumulate_normalize(&t, &g).unwrap();
        assert!((c.paths.path(0)[2] - 0.05).abs() < 1e-15);

        let small = AnalysisConfig::new(0.05);
        assert!(cumulate_normalize(&t, &small).is_err());
    }

    #[test]
    fn zero_starts_are_clipped_and_counted() {
        let t = RawSeriesTable {
            times: vec![0.0, 1.0, 2.0],
            locations: vec!["a".into()],
            counts: vec![vec![0.0, 3.0, 5.0]],
            populations: vec![100.0],
        };
        let c = cumulate_normalize(&t, &AnalysisConfig::new(0.25)).unwrap();
        assert_eq!(c.clips, 1);
        assert!(c.paths.path(0)[0] > 0.0);
    }

    #[test]
    fn calendar_units_and_window() {
        let t = RawSeriesTable {
            times: vec![1950.0, 1950.5, 1951.0, 1951.5],
            locations: vec!["a".into()],
            counts: vec![vec![1.0, 1.0, 1.0, 1.0]],
            populations: vec![100.0],
        };
        let mut cfg = AnalysisConfig::new(0.25);
        cfg.time_unit = TimeUnit::Calendar;
        let c = cumulate_normalize(&t, &cfg).unwrap();
        assert_eq!(c.paths.grid().delta(), 0.5);
        cfg.time_unit = TimeUnit::Index;
        cfg.window = Some([1.0, 3.0]);
        let c = cumulate_normalize(&t, &cfg).unwrap();
        assert_eq!(c.paths.n(), 3);
        assert_eq!(c.paths.grid().t0(), 1.0);
        assert!((c.paths.path(0)[0] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn suggest_k_examples() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let p = PathSet::from_rows(g, vec![vec![0.1, 0.238]], Space::X, 1.0).unwrap();
        assert!((suggest_k(&p) - 0.2499).abs() < 1e-12);
        let p = PathSet::from_rows(g, vec![vec![0.3, 0.3]], Space::X, 1.0).unwrap();
        assert!((suggest_k(&p) - 0.315).abs() < 1e-12);
    }

    #[test]
    fn fixture_shape() {
        let t = measles_like_fixture(&FixtureSpec::default()).unwrap();
        assert_eq!((t.locations.len(), t.times.len()), (20, 546));
        assert!(t.counts.iter().all(|c| c[0] > 0.0));
        let c = cumulate_normalize(&t, &AnalysisConfig::new(0.25)).unwrap();
        assert_eq!(c.clips, 0);
        for p in c.paths.paths() {
            assert!(p.windows(2).all(|w| w[1] >= w[0]));
            assert!(p.iter().all(|&v| v > 0.0 && v < 0.25));
        }
    }

    #[test]
    fn metadata_header_format() {
        let h = metadata_header(&config_hash(b"{}"), Some(7));
        assert!(h.starts_with("# config-hash="));
        assert!(h.contains(", seed=7, version="));
        assert_eq!(config_hash(b"abc"), config_hash(b"abc"));
        assert_ne!(config_hash(b"abc"), config_hash(b"abd"));
    }
}
