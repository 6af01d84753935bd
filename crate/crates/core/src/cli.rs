//! The `sidiff` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 invalid input or configuration,
//! 4 I/O failure, 5 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataio::{
    self, cumulate_normalize, default_out_dir, load_csv, measles_like_fixture, metadata_header, read_paths,
    suggest_k, write_estimate, write_paths, write_series_csv, AnalysisConfig, EstimateMeta, FixtureSpec,
    Normalization, PathsMeta, TimeUnit,
};
use crate::error::{Error, ErrorCategory, Result};
use crate::estimate::{estimate_gmm, EstimateOptions, DEFAULT_CLIP_EPS};
use crate::experiments::{run_experiment, write_reports, ExperimentPlan};
use crate::model::DriftForm;
use crate::rates::{RateFunction, RatePair};
use crate::simulate::{simulate_em_replicate, simulate_exact, TimeGrid};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "sidiff", version, about = "Simulate and estimate the time-inhomogeneous SI diffusion")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate sample paths from a rate configuration.
    Simulate(SimulateArgs),
    /// Estimate λ(t) and σ²(t) from a path CSV.
    Estimate(EstimateArgs),
    /// Run Monte Carlo experiments and write report CSVs.
    Experiment(ExperimentArgs),
    /// Cumulate, normalize and estimate from case-count series.
    Analyze(AnalyzeArgs),
    /// Write a synthetic measles-shaped case series and population file.
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    Exact,
    Em,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON file `{"lambda": <rate>, "sigma2": <rate>}`.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub x0: f64,
    #[arg(long = "K")]
    pub k: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long = "T")]
    pub t_end: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 50)]
    pub paths: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SimMethod::Exact)]
    pub method: SimMethod,
    /// Euler–Maruyama steps per observation interval.
    #[arg(long, default_value_t = 10)]
    pub refine: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long = "in")]
    #[serde(skip)]
    pub input: PathBuf,
    #[arg(long = "K")]
    pub k: f64,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = DEFAULT_CLIP_EPS)]
    pub clip_eps: f64,
    /// Reject boundary values instead of clipping them.
    #[arg(long)]
    pub no_clip: bool,
    /// Also compute the constant-rate maximum-likelihood estimates.
    #[arg(long)]
    pub mle: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    /// JSON file `{"experiments": [...]}`.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    /// Override the replicate count of every experiment.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Override the master seed of every experiment.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    PerLocation,
    GlobalMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimeArg {
    Index,
    Calendar,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Wide CSV `time,<loc1>,...` of incident counts.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// CSV `location,population`.
    #[arg(long)]
    pub pop: PathBuf,
    #[arg(long = "K")]
    pub k: f64,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = DEFAULT_CLIP_EPS)]
    pub clip_eps: f64,
    #[arg(long, value_enum, default_value_t = NormArg::PerLocation)]
    pub normalization: NormArg,
    #[arg(long, value_enum, default_value_t = TimeArg::Index)]
    pub time_unit: TimeArg,
    /// Restrict to model times in `[A, B]`.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub window: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the normalized cumulative paths here.
    #[arg(long)]
    pub paths_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = FixtureSpec::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub locations: usize,
    #[arg(long, default_value_t = 546)]
    pub periods: usize,
}

/// Rate configuration file read by `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub lambda: RateFunction<f64>,
    pub sigma2: RateFunction<f64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}

fn hash_of<T: Serialize>(v: &T) -> String {
    dataio::config_hash(serde_json::to_string(v).unwrap_or_default().as_bytes())
}

fn out_or_default(out: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let p = out.unwrap_or_else(|| default_out_dir().join(name));
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(p)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let rc: RatesConfig = read_json(&args.config)?;
    let rates = RatePair::new(rc.lambda.clone(), rc.sigma2.clone(), args.k)?;
    let grid = TimeGrid::spanning(args.t0, args.t_end, args.delta)?;
    let paths = match args.method {
        SimMethod::Exact => simulate_exact(&rates, args.x0, &grid, args.paths, args.seed)?,
        SimMethod::Em => {
            let (p, dg) =
                simulate_em_replicate(&rates, args.x0, &grid, args.refine, args.paths, args.seed, 0, DriftForm::Exact)?;
            if dg.clamp_hits > 0 {
                eprintln!("Euler-Maruyama clamped {} iterates on {} paths", dg.clamp_hits, dg.clamped_paths);
            }
            p
        }
    };
    if paths.saturated > 0 {
        log::warn!("{} simulated values saturated at K", paths.saturated);
    }
    let header = metadata_header(&hash_of(&(&args, &rc)), Some(args.seed));
    let meta = PathsMeta {
        k: args.k,
        space: paths.space(),
        seed: Some(args.seed),
        x0: Some(args.x0),
        lambda: Some(rc.lambda),
        sigma2: Some(rc.sigma2),
        saturated: paths.saturated,
    };
    let out = out_or_default(args.out, "paths.csv")?;
    write_paths(&out, &paths, &meta, &header)?;
    eprintln!("wrote {} paths x {} times to {}", paths.d(), paths.n(), out.display());
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let (paths, meta) = read_paths(&args.input, Some(args.k))?;
    let opts = EstimateOptions {
        stride: args.stride,
        clip_eps: (!args.no_clip).then_some(args.clip_eps),
        with_mle: args.mle,
    };
    let est = estimate_gmm(&paths, args.k, &opts)?;
    let seed = meta.as_ref().and_then(|m| m.seed);
    let header = metadata_header(&hash_of(&args), seed);
    let out = out_or_default(args.out, "estimate.csv")?;
    write_estimate(
        &out,
        &est,
        &EstimateMeta {
            k: args.k,
            stride: args.stride,
            d: paths.d(),
            mle: est.mle,
            diagnostics: est.diagnostics.clone(),
            suggested_k: None,
        },
        &header,
    )?;
    report_estimate(&est);
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn report_estimate(est: &crate::EstimateResult) {
    let dg = &est.diagnostics;
    if dg.clip_count > 0 {
        eprintln!("clipped {} boundary values", dg.clip_count);
    }
    if dg.negative_sigma2_fraction > 0.0 {
        eprintln!(
            "raw sigma2 negative on {:.1}% of the grid (kept in sigma2_hat_raw)",
            100.0 * dg.negative_sigma2_fraction
        );
    }
    if let Some(m) = est.mle {
        eprintln!("MLE: lambda = {}, sigma2 = {}", m.lambda, m.sigma2);
    }
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut plan: ExperimentPlan = read_json(&args.config)?;
    if plan.experiments.is_empty() {
        return Err(Error::Config("no experiments listed".into()));
    }
    for c in &mut plan.experiments {
        if let Some(n) = args.replicates {
            c.replicates = n;
        }
        if let Some(s) = args.seed {
            c.seed = s;
        }
        c.validate()?;
    }
    let header = metadata_header(&hash_of(&plan), args.seed.or(Some(plan.experiments[0].seed)));
    let mut reports = Vec::with_capacity(plan.experiments.len());
    for c in &plan.experiments {
        let r = run_experiment(c)?;
        for row in &r.mre {
            eprintln!(
                "{:<16} {}  MRE(lambda) = {:.4}  MRE(sigma2) = {:.4}",
                c.name,
                row.method.as_str(),
                row.mre_lambda,
                row.mre_sigma2
            );
        }
        eprintln!("{:<16} {} replicates in {:.2?}", c.name, c.replicates, r.runtime);
        reports.push(r);
    }
    let dir = args.out_dir.unwrap_or_else(|| default_out_dir().join("reports"));
    write_reports(&reports, &dir, &header)?;
    eprintln!("wrote reports to {}", dir.display());
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let window = match args.window.as_deref() {
        Some([a, b]) => Some([*a, *b]),
        _ => None,
    };
    let cfg = AnalysisConfig {
        k: args.k,
        clip_eps: Some(args.clip_eps),
        stride: args.stride,
        normalization: match args.normalization {
            NormArg::PerLocation => Normalization::PerLocation,
            NormArg::GlobalMax => Normalization::GlobalMax,
        },
        time_unit: match args.time_unit {
            TimeArg::Index => TimeUnit::Index,
            TimeArg::Calendar => TimeUnit::Calendar,
        },
        window,
    };
    let table = load_csv(&args.input, &args.pop)?;
    let cum = cumulate_normalize(&table, &cfg)?;
    let suggested = suggest_k(&cum.paths);
    eprintln!(
        "{} locations x {} times; {} zero values lifted; heuristic K suggestion {suggested:.4} (using K = {})",
        cum.paths.d(),
        cum.paths.n(),
        cum.clips,
        cfg.k
    );
    let est = estimate_gmm(
        &cum.paths,
        cfg.k,
        &EstimateOptions {
            stride: cfg.stride,
            clip_eps: cfg.clip_eps,
            with_mle: false,
        },
    )?;
    let mut diagnostics = est.diagnostics.clone();
    diagnostics.clip_count += cum.clips;
    let header = metadata_header(&hash_of(&cfg), None);
    if let Some(p) = args.paths_out {
        let meta = PathsMeta {
            k: cfg.k,
            space: cum.paths.space(),
            seed: None,
            x0: None,
            lambda: None,
            sigma2: None,
            saturated: 0,
        };
        write_paths(&out_or_default(Some(p), "")?, &cum.paths, &meta, &header)?;
    }
    let out = out_or_default(args.out, "estimate.csv")?;
    write_estimate(
        &out,
        &est,
        &EstimateMeta {
            k: cfg.k,
            stride: cfg.stride,
            d: cum.paths.d(),
            mle: None,
            diagnostics,
            suggested_k: Some(suggested),
        },
        &header,
    )?;
    report_estimate(&est);
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn fixture(args: FixtureArgs) -> Result<()> {
    let spec = FixtureSpec {
        locations: args.locations,
        periods: args.periods,
        seed: args.seed,
        ..FixtureSpec::default()
    };
    let table = measles_like_fixture(&spec)?;
    let dir = args.out_dir.unwrap_or_else(default_out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_series_csv(&table, &dir.join("cases.csv"), &dir.join("populations.csv"))?;
    eprintln!("wrote cases.csv and populations.csv to {}", dir.display());
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Input => EXIT_INPUT,
        ErrorCategory::Io => EXIT_IO,
        ErrorCategory::Numerical => EXIT_NUMERICAL,
    }
}

fn category_name(c: ErrorCategory) -> &'static str {
    match c {
        ErrorCategory::Input => "input error",
        ErrorCategory::Io => "I/O error",
        ErrorCategory::Numerical => "numerical error",
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already initialized: {e}");
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Experiment(a) => experiment(a),
        Command::Analyze(a) => analyze(a),
        Command::Fixture(a) => fixture(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sidiff: {}: {e}", category_name(e.category()));
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_k_is_usage_error() {
        assert_eq!(run(["sidiff", "estimate", "--in", "x.csv"]), EXIT_USAGE);
        assert_eq!(run(["sidiff", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["sidiff", "estimate", "--in", "x.csv", "--K", "1", "--frobnicate"]), EXIT_USAGE);
    }

    #[test]
    fn missing_input_is_io_error() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("none.csv");
        let code = run(["sidiff", "estimate", "--in", p.to_str().unwrap(), "--K", "200"]);
        assert_eq!(code, EXIT_IO);
    }

    #[test]
    fn bad_config_is_input_error() {
        let d = tempfile::tempdir().unwrap();
        let cfg = d.path().join("rates.json");
        std::fs::write(&cfg, "{\"lambda\": 3}").unwrap();
        let out = d.path().join("p.csv");
        let code = run([
            "sidiff", "simulate", "--config", cfg.to_str().unwrap(), "--x0", "20", "--K", "200", "--T", "1",
            "--delta", "0.1", "--seed", "1", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_INPUT);
    }
}
