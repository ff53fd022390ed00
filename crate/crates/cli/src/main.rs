mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use wishart_core::ensemble_mc::{histogram_on, run_trials, sample_spectra, Normalization};
use wishart_core::error::Error;
use wishart_core::limits::{c_strong, c_weak, droplet, strong_density_on, weak_density_on};
use wishart_core::params::{EnsembleParams, Regime};
use wishart_core::sop_kernel::{expected_number, r_one_point, SOPCache};
use wishart_core::verify::{run_suite, VerifyOptions, CHECK_NAMES};

use output::{cell, Sink};

/// Kernel columns are only filled in up to this size.
const KERNEL_MAX_N: usize = 40;
const DEFAULT_GRID: usize = 2001;
const HIST_BINS: usize = 30;
/// Half-width of the window around the origin left out of strong, nu = 0 grids.
const ORIGIN_GAP: f64 = 1e-6;
const WEAK_LOWER: f64 = 1e-8;
/// Fraction of the half-support covered by the geometric run next to the origin window.
const GRADED_SPLIT: f64 = 0.05;

#[derive(Parser)]
#[command(name = "wishart", version, about = "Real eigenvalues of asymmetric Wishart matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected number of real eigenvalues: exact kernel, Monte Carlo and asymptotic.
    ExpectedNumber(ExpectedArgs),
    /// Density of real eigenvalues on a grid.
    Density(DensityArgs),
    /// Run the identity suite.
    Verify(VerifyArgs),
    /// Sample matrices and dump their eigenvalues.
    Sample(SampleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Strong,
    Weak,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ParamArgs {
    /// Matrix size N (even).
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Rectangular parameter nu.
    #[arg(long, conflicts_with = "rho")]
    nu: Option<f64>,
    /// Proportional rectangular parameter, nu = rho N.
    #[arg(long)]
    rho: Option<f64>,
    /// Non-Hermiticity parameter (strong regime).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value = "strong")]
    regime: RegimeArg,
    /// Weak-regime parameter, tau = 1 - alpha^2 / (2N).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

#[derive(Args)]
struct IoArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct ExpectedArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Additional matrix sizes, one row each.
    #[arg(long = "also-n", value_delimiter = ',')]
    also_n: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Point count (Chebyshev-Lobatto nodes over the support) or `lo:hi:count` (uniform).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Check names to run, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Replace every tolerance with this value.
    #[arg(long)]
    tol: Option<f64>,
    /// Same as `--format json`.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    io: IoArgs,
}

enum Failure {
    Config(String),
    Numeric(Error),
    Io(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(m) | Error::Domain(m) => Failure::Config(m),
            other => Failure::Numeric(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let outcome = match cli.command {
        Command::ExpectedNumber(a) => cmd_expected_number(a),
        Command::Density(a) => cmd_density(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sample(a) => cmd_sample(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::PrecisionLoss { .. }) { 3 } else { 1 })
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(4),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("WISHART_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("WISHART_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("WISHART_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

impl ParamArgs {
    fn nu_for(&self, n: usize) -> Result<f64, Failure> {
        match (self.nu, self.rho) {
            (Some(nu), None) => Ok(nu),
            (None, Some(rho)) => {
                if !(rho >= 0.0) {
                    return Err(Failure::Config(format!("rho must be non-negative, got {rho}")));
                }
                Ok(rho * n as f64)
            }
            (None, None) => Ok(0.0),
            (Some(_), Some(_)) => Err(Failure::Config("give --nu or --rho, not both".into())),
        }
    }

    fn build(&self, n: usize) -> Result<EnsembleParams, Failure> {
        let nu = self.nu_for(n)?;
        let p = match self.regime {
            RegimeArg::Strong => EnsembleParams::strong(n, nu, self.tau.unwrap_or(0.5))?,
            RegimeArg::Weak => {
                if self.tau.is_some() {
                    return Err(Failure::Config("--tau is fixed by --alpha in the weak regime".into()));
                }
                EnsembleParams::weak(n, nu, self.alpha)?
            }
        };
        Ok(p)
    }
}

fn regime_name(p: &EnsembleParams) -> &'static str {
    match p.regime {
        Regime::Strong => "strong",
        Regime::Weak { .. } => "weak",
    }
}

fn alpha_of(p: &EnsembleParams) -> Option<f64> {
    match p.regime {
        Regime::Strong => None,
        Regime::Weak { alpha } => Some(alpha),
    }
}

fn params_json(p: &EnsembleParams) -> serde_json::Value {
    json!({
        "n": p.n,
        "nu": p.nu,
        "tau": p.tau,
        "regime": regime_name(p),
        "alpha": alpha_of(p),
    })
}

/// Leading-order prediction for the expected number of real eigenvalues.
fn asymptotic_count(p: &EnsembleParams) -> Result<f64, Error> {
    match p.regime {
        Regime::Strong => {
            let c = c_strong(p.tau, p.rho())?;
            Ok((p.nf() / (4.0 * std::f64::consts::PI * p.s())).sqrt() * c)
        }
        Regime::Weak { alpha } => Ok(c_weak(alpha)? * p.nf()),
    }
}

#[derive(Serialize)]
struct ExpectedRow {
    n: usize,
    nu: f64,
    tau: f64,
    regime: &'static str,
    alpha: Option<f64>,
    kernel: Option<f64>,
    kernel_err: Option<f64>,
    mc_mean: Option<f64>,
    mc_stderr: Option<f64>,
    asymptotic: f64,
}

fn cmd_expected_number(a: ExpectedArgs) -> CmdResult {
    let mut sizes = vec![a.params.n];
    sizes.extend(&a.also_n);
    let mut rows = Vec::with_capacity(sizes.len());
    for n in sizes {
        let p = a.params.build(n)?;
        let kernel = if n <= KERNEL_MAX_N {
            let cache = SOPCache::new(p)?;
            Some(expected_number(&cache)?)
        } else {
            None
        };
        let mc = if a.trials > 0 {
            p.nu_integer()?;
            Some(run_trials(&p, a.trials, a.seed)?)
        } else {
            None
        };
        rows.push(ExpectedRow {
            n,
            nu: p.nu,
            tau: p.tau,
            regime: regime_name(&p),
            alpha: alpha_of(&p),
            kernel: kernel.map(|k| k.value),
            kernel_err: kernel.map(|k| k.abs_err_estimate),
            mc_mean: mc.as_ref().map(|b| b.mean_count()),
            mc_stderr: mc.as_ref().map(|b| b.stderr_count()).filter(|s| s.is_finite()),
            asymptotic: asymptotic_count(&p)?,
        });
    }

    let mut sink = Sink::open(a.io.out.as_deref())?;
    match a.io.format {
        Format::Csv => {
            let mut w = sink.csv();
            w.write_record(["n", "nu", "tau", "regime", "kernel", "mc_mean", "mc_stderr", "asymptotic"])?;
            for r in &rows {
                w.write_record([
                    r.n.to_string(),
                    r.nu.to_string(),
                    r.tau.to_string(),
                    r.regime.to_string(),
                    cell(r.kernel),
                    cell(r.mc_mean),
                    cell(r.mc_stderr),
                    r.asymptotic.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = json!({
                "schema": "v1",
                "command": "expected-number",
                "trials": a.trials,
                "seed": a.seed,
                "rows": rows,
            });
            sink.json(&doc)?;
        }
    }
    Ok(())
}

/// Chebyshev-Lobatto nodes on [a, b], increasing, endpoints exact.
fn lobatto(a: f64, b: f64, count: usize) -> Vec<f64> {
    let m = count.max(2) - 1;
    let mut g: Vec<f64> = (0..=m)
        .map(|k| {
            let t = -(std::f64::consts::PI * k as f64 / m as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * t
        })
        .collect();
    g[0] = a;
    g[m] = b;
    g
}

fn parse_grid(spec: Option<&str>, support: (f64, f64), gap: bool) -> Result<Vec<f64>, Failure> {
    let bad = |s: &str| Failure::Config(format!("--grid expects a count or lo:hi:count, got {s:?}"));
    let Some(spec) = spec else {
        return Ok(support_grid(support, DEFAULT_GRID, gap));
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [count] => {
            let c: usize = count.trim().parse().map_err(|_| bad(spec))?;
            if c < 2 {
                return Err(bad(spec));
            }
            Ok(support_grid(support, c, gap))
        }
        [lo, hi, count] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad(spec))?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad(spec))?;
            let c: usize = count.trim().parse().map_err(|_| bad(spec))?;
            if c < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(bad(spec));
            }
            let g = (0..c).map(|k| lo + (hi - lo) * k as f64 / (c - 1) as f64);
            Ok(g.filter(|x| !gap || x.abs() >= ORIGIN_GAP).collect())
        }
        _ => Err(bad(spec)),
    }
}

/// Nodes over the support. With `gap` the origin window is cut out, and each side
/// is graded geometrically towards it to follow the |x|^{-1/2} singularity.
fn support_grid((a, b): (f64, f64), count: usize, gap: bool) -> Vec<f64> {
    if !gap || !(a < -ORIGIN_GAP && b > ORIGIN_GAP) {
        return lobatto(a, b, count);
    }
    let left = ((count as f64 * -a / (b - a)).round() as usize).max(4);
    let right = count.saturating_sub(left).max(4);
    let mut g: Vec<f64> = graded(-a, left).iter().rev().map(|x| -x).collect();
    g.extend(graded(b, right));
    g
}

/// `count` nodes on [ORIGIN_GAP, edge]: a geometric run up to GRADED_SPLIT * edge, then Lobatto nodes.
fn graded(edge: f64, count: usize) -> Vec<f64> {
    let split = GRADED_SPLIT * edge;
    let k = (count / 4).max(2);
    let q = (split / ORIGIN_GAP).ln() / k as f64;
    let mut g: Vec<f64> = (0..k).map(|i| ORIGIN_GAP * (q * i as f64).exp()).collect();
    g.extend(lobatto(split, edge, count - k));
    g
}

#[derive(Serialize)]
struct DensityRow {
    x: f64,
    kernel: Option<f64>,
    limit: f64,
    mc: Option<f64>,
}

fn cmd_density(a: DensityArgs) -> CmdResult {
    let p = a.params.build(a.params.n)?;
    let rho = p.rho();
    let geom = droplet(p.tau, rho);
    let (support, gap) = match p.regime {
        Regime::Strong => ((geom.xi_minus, geom.xi_plus), p.nu == 0.0),
        Regime::Weak { .. } => {
            let lo = if geom.lambda_minus == 0.0 { WEAK_LOWER } else { geom.lambda_minus };
            ((lo, geom.lambda_plus), false)
        }
    };
    let grid = parse_grid(a.grid.as_deref(), support, gap)?;
    let limit = match p.regime {
        Regime::Strong => strong_density_on(p.tau, rho, &grid)?,
        Regime::Weak { alpha } => weak_density_on(alpha, rho, &grid)?,
    };

    let kernel = if p.n <= KERNEL_MAX_N {
        let cache = SOPCache::new(p)?;
        let e = expected_number(&cache)?.value;
        let vals = grid
            .par_iter()
            .map(|&x| r_one_point(&cache, x).map(|r| r.value / e))
            .collect::<Result<Vec<f64>, Error>>()?;
        Some(vals)
    } else {
        None
    };

    let mc = if a.trials > 0 {
        p.nu_integer()?;
        let batch = run_trials(&p, a.trials, a.seed)?;
        let edges: Vec<f64> =
            (0..=HIST_BINS).map(|k| support.0 + (support.1 - support.0) * k as f64 / HIST_BINS as f64).collect();
        let h = histogram_on(&batch, &edges, Normalization::Density)?;
        let vals: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let k = edges.partition_point(|&e| e <= x).clamp(1, HIST_BINS) - 1;
                h.masses[k] / (edges[k + 1] - edges[k])
            })
            .collect();
        Some(vals)
    } else {
        None
    };

    let rows: Vec<DensityRow> = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| DensityRow {
            x,
            kernel: kernel.as_ref().map(|v| v[i]),
            limit: limit[i],
            mc: mc.as_ref().map(|v| v[i]),
        })
        .collect();

    let mut sink = Sink::open(a.io.out.as_deref())?;
    match a.io.format {
        Format::Csv => {
            let mut w = sink.csv();
            w.write_record(["x", "kernel", "limit", "mc"])?;
            for r in &rows {
                w.write_record([r.x.to_string(), cell(r.kernel), r.limit.to_string(), cell(r.mc)])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = json!({
                "schema": "v1",
                "command": "density",
                "params": params_json(&p),
                "trials": a.trials,
                "seed": a.seed,
                "columns": ["x", "kernel", "limit", "mc"],
                "rows": rows,
            });
            sink.json(&doc)?;
        }
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    if let Some(bad) = a.only.iter().find(|o| !CHECK_NAMES.contains(&o.as_str())) {
        return Err(Failure::Config(format!("unknown check {bad:?}; known checks: {}", CHECK_NAMES.join(", "))));
    }
    if let Some(t) = a.tol {
        if !(t >= 0.0) {
            return Err(Failure::Config(format!("--tol must be non-negative, got {t}")));
        }
    }
    let results = run_suite(&a.only, &VerifyOptions { tol: a.tol });
    let passed = results.iter().all(|r| r.passed);

    let mut sink = Sink::open(a.io.out.as_deref())?;
    if a.json || a.io.format == Format::Json {
        let doc = json!({
            "schema": "v1",
            "command": "verify",
            "passed": passed,
            "checks": results,
        });
        sink.json(&doc)?;
    } else {
        let mut text = format!("{:<18} {:<6} {:>6}  {:>12}  {:>10}  {}\n", "check", "status", "evals", "worst", "tolerance", "at");
        for r in &results {
            let status = if r.passed { "PASS" } else { "FAIL" };
            let (res, tol, label) = match &r.worst {
                Some(m) => (format!("{:.3e}", m.residual), format!("{:.1e}", m.tolerance), m.label.clone()),
                None => ("-".into(), "-".into(), String::new()),
            };
            text += &format!("{:<18} {:<6} {:>6}  {:>12}  {:>10}  {}\n", r.name, status, r.evaluations, res, tol, label);
            if let Some(e) = &r.error {
                text += &format!("{:<18} error: {e}\n", "");
            }
        }
        let npass = results.iter().filter(|r| r.passed).count();
        text += &format!("{npass}/{} checks passed\n", results.len());
        sink.text(&text)?;
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_sample(a: SampleArgs) -> CmdResult {
    let p = a.params.build(a.params.n)?;
    p.nu_integer()?;
    if a.trials == 0 {
        return Err(Failure::Config("--trials must be at least 1".into()));
    }
    let spectra = sample_spectra(&p, a.trials, a.seed)?;

    let mut sink = Sink::open(a.io.out.as_deref())?;
    match a.io.format {
        Format::Csv => {
            let mut w = sink.csv();
            w.write_record(["re", "im", "trial", "real"])?;
            for s in &spectra {
                for (re, im) in s.re.iter().zip(&s.im) {
                    let real = if *im == 0.0 { "1" } else { "0" };
                    w.write_record([re.to_string(), im.to_string(), s.trial.to_string(), real.to_string()])?;
                }
            }
            w.flush()?;
        }
        Format::Json => {
            let eigenvalues: Vec<_> = spectra
                .iter()
                .flat_map(|s| {
                    s.re.iter().zip(&s.im).map(move |(re, im)| json!({"re": re, "im": im, "trial": s.trial, "real": *im == 0.0}))
                })
                .collect();
            let real_pool: Vec<f64> = spectra.iter().flat_map(|s| s.reals()).collect();
            let doc = json!({
                "schema": "v1",
                "command": "sample",
                "params": params_json(&p),
                "trials": a.trials,
                "seed": a.seed,
                "eigenvalues": eigenvalues,
                "real_pool": real_pool,
            });
            sink.json(&doc)?;
        }
    }
    Ok(())
}
