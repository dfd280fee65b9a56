//! `switchstab` command line. Mode numbers on the command line and in
//! printed output start at 1.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::lemmas::{exp_integral_expectation, exp_integral_monte_carlo, exp_integral_rate_shifted};
use crate::model::{load_system, SwitchedLinearSystem, ValidatedSystem};
use crate::region::{render_region, sweep, Axis, SweepConfig, DEFAULT_MARGINAL_BAND};
use crate::sim::{estimate_cost, propagate, replica_rng, sample_switching_signal};
use crate::stability::{
    certificate_margin, check_stochastic_stability, StabilityCertificate, StabilityOptions, StabilityVerdict,
    UnstableReason,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNSTABLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "switchstab", version, about = "Stochastic stability of dwell-time switched linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide stochastic stability at one set of fixed dwell times.
    Check(CheckArgs),
    /// Stability region over two fixed dwell times (CSV + SVG).
    Sweep(SweepArgs),
    /// Monte Carlo estimate of the expected quadratic cost.
    Simulate(SimulateArgs),
    /// Re-check a certificate file against a model.
    Verify(VerifyArgs),
    /// Spot-check the growth bound and exponential-window identities.
    Lemmas(LemmasArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Fixed dwell times, one per mode; defaults to the model's.
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Write the certificate here when the verdict is Stable.
    #[arg(long)]
    cert: Option<PathBuf>,
    /// Exit with status 2 when the verdict is Unstable.
    #[arg(long)]
    fail_on_unstable: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `lo:hi:step,lo:hi:step` for the two swept dwell times.
    #[arg(long, default_value = "0:5:0.1,0:5:0.1")]
    grid: String,
    /// Modes on the two axes.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    axes: Vec<usize>,
    /// Output prefix; writes PREFIX.csv and PREFIX.svg.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "SWITCHSTAB_THREADS")]
    threads: Option<usize>,
    /// Cells with |normalized margin| at or below this are flagged marginal.
    #[arg(long, default_value_t = DEFAULT_MARGINAL_BAND)]
    marginal_band: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Initial state.
    #[arg(long, value_delimiter = ',')]
    x0: Vec<f64>,
    /// Initial mode.
    #[arg(long, default_value_t = 1)]
    r0: usize,
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    #[arg(long, default_value_t = 100.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "SWITCHSTAB_THREADS")]
    threads: Option<usize>,
    /// Also write the estimate JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one sample trajectory (replica 0) as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Sample spacing of the trajectory CSV.
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Certificate JSON.
    #[arg(long)]
    cert: PathBuf,
}

#[derive(Debug, Args)]
struct LemmasArgs {
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Single point instead of the built-in grid (needs --a and --b too).
    #[arg(long, requires_all = ["a", "b"])]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
}

type CliResult = Result<i32, String>;

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_ERROR
                }
            };
        }
    };
    let result = match cli.command {
        Command::Check(a) => cmd_check(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Lemmas(a) => cmd_lemmas(a, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

fn load(args: &ModelArgs) -> Result<(SwitchedLinearSystem, ValidatedSystem), String> {
    let mut sys = load_system(&args.model).map_err(|e| e.to_string())?;
    if let Some(d) = &args.d {
        if d.len() != sys.m() {
            return Err(format!("--d has {} values, model has {} modes", d.len(), sys.m()));
        }
        sys = sys.with_dwell(d);
    }
    let validated = sys.validate().map_err(|e| e.to_string())?;
    Ok((sys, validated))
}

fn threads(requested: Option<usize>) -> usize {
    requested.filter(|&t| t > 0).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn io_err(e: std::io::Error) -> String {
    e.to_string()
}

fn cmd_check(args: CheckArgs, out: &mut dyn Write) -> CliResult {
    let (_, sys) = load(&args.model)?;
    let verdict = check_stochastic_stability(&sys);
    let normalized = verdict.normalized_margin();
    match &verdict {
        StabilityVerdict::Stable(cert) => {
            writeln!(out, "verdict: Stable").map_err(io_err)?;
            writeln!(out, "margin: {:.16e}", cert.margin).map_err(io_err)?;
            writeln!(out, "normalized_margin: {normalized:.16e}").map_err(io_err)?;
            writeln!(out, "marginal: {}", cert.marginal).map_err(io_err)?;
            if let Some(path) = &args.cert {
                cert.save(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
                writeln!(out, "certificate: {}", path.display()).map_err(io_err)?;
            }
        }
        StabilityVerdict::Unstable(w) => {
            writeln!(out, "verdict: Unstable").map_err(io_err)?;
            let reason = match w.reason {
                UnstableReason::NonPositiveDefinite(i) => format!("solution not positive definite in mode {}", i + 1),
                UnstableReason::SingularOperator => "coupled operator singular".to_string(),
            };
            writeln!(out, "reason: {reason}").map_err(io_err)?;
            let eigs: Vec<String> = w.min_eigenvalues.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "min_eigenvalues: {}", eigs.join(",")).map_err(io_err)?;
            writeln!(out, "normalized_margin: {normalized:.16e}").map_err(io_err)?;
            writeln!(out, "marginal: {}", w.marginal).map_err(io_err)?;
            if args.cert.is_some() {
                writeln!(out, "certificate: none (unstable)").map_err(io_err)?;
            }
        }
    }
    if args.fail_on_unstable && !verdict.is_stable() {
        return Ok(EXIT_UNSTABLE);
    }
    Ok(EXIT_OK)
}

fn parse_grid(spec: &str) -> Result<[(f64, f64, f64); 2], String> {
    let axes: Vec<&str> = spec.split(',').collect();
    if axes.len() != 2 {
        return Err(format!("--grid needs two axes, got {spec:?}"));
    }
    let mut out = [(0.0, 0.0, 0.0); 2];
    for (k, ax) in axes.iter().enumerate() {
        let parts: Result<Vec<f64>, _> = ax.split(':').map(str::parse::<f64>).collect();
        match parts.as_deref() {
            Ok([lo, hi, step]) => out[k] = (*lo, *hi, *step),
            _ => return Err(format!("bad grid axis {ax:?}, expected lo:hi:step")),
        }
    }
    Ok(out)
}

fn cmd_sweep(args: SweepArgs, out: &mut dyn Write) -> CliResult {
    let (sys, _) = load(&args.model)?;
    let grid = parse_grid(&args.grid)?;
    if args.axes.len() != 2 || args.axes.contains(&0) {
        return Err("--axes needs two mode numbers (starting at 1)".into());
    }
    let axes = [
        Axis::new(args.axes[0] - 1, grid[0].0, grid[0].1, grid[0].2),
        Axis::new(args.axes[1] - 1, grid[1].0, grid[1].1, grid[1].2),
    ];
    let mut config = SweepConfig::new(sys, axes).threads(threads(args.threads));
    config.marginal_band = args.marginal_band;
    let region = sweep(&config).map_err(|e| e.to_string())?;
    let (csv, svg) = render_region(&region, &args.out).map_err(|e| format!("cannot write output: {e}"))?;
    let marginal = region.cells.iter().filter(|c| c.marginal).count();
    writeln!(
        out,
        "cells: {} stable: {} marginal: {}\ncsv: {}\nsvg: {}",
        region.cells.len(),
        region.stable_count(),
        marginal,
        csv.display(),
        svg.display()
    )
    .map_err(io_err)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(args: SimulateArgs, out: &mut dyn Write) -> CliResult {
    let (_, sys) = load(&args.model)?;
    if args.r0 == 0 || args.r0 > sys.m() {
        return Err(format!("--r0 must be between 1 and {}", sys.m()));
    }
    if args.x0.len() != sys.n() {
        return Err(format!("--x0 has {} entries, system order is {}", args.x0.len(), sys.n()));
    }
    if args.runs < 2 {
        return Err("--runs must be at least 2".into());
    }
    if !(args.horizon > 0.0) {
        return Err("--horizon must be positive".into());
    }
    let r0 = args.r0 - 1;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads(args.threads)).build().map_err(|e| e.to_string())?;
    let estimate = pool
        .install(|| estimate_cost(&sys, &args.x0, r0, args.runs, args.horizon, args.seed))
        .map_err(|e| e.to_string())?;
    let json = estimate.to_json();
    writeln!(out, "{json}").map_err(io_err)?;
    if let Some(path) = &args.out {
        std::fs::write(path, format!("{json}\n")).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    if let Some(path) = &args.trajectory {
        let mut rng = replica_rng(args.seed, 0);
        let sample = sample_switching_signal(&sys, r0, args.horizon, &mut rng);
        let traj = propagate(&sys, &sample, &args.x0, args.dt).map_err(|e| e.to_string())?;
        let file = std::fs::File::create(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        traj.write_csv(std::io::BufWriter::new(file)).map_err(io_err)?;
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: VerifyArgs, out: &mut dyn Write) -> CliResult {
    let (_, sys) = load(&args.model)?;
    let cert = StabilityCertificate::load(&args.cert)
        .map_err(|e| format!("cannot read certificate {}: {e}", args.cert.display()))?;
    let margin = certificate_margin(&sys, &cert.p).map_err(|e| e.to_string())?;
    let pd = cert.all_positive_definite(&StabilityOptions::default());
    writeln!(out, "margin: {margin:.16e}").map_err(io_err)?;
    writeln!(out, "positive_definite: {pd}").map_err(io_err)?;
    writeln!(out, "valid: {}", pd && margin < 0.0).map_err(io_err)?;
    Ok(EXIT_OK)
}

fn cmd_lemmas(args: LemmasArgs, out: &mut dyn Write) -> CliResult {
    if args.samples < 2 {
        return Err("--samples must be at least 2".into());
    }
    let points: Vec<(f64, f64, f64)> = match (args.lambda, args.a, args.b) {
        (Some(l), Some(a), Some(b)) => vec![(l, a, b)],
        _ => [0.5, 1.0, 2.0]
            .iter()
            .flat_map(|&l| [-1.0, 0.0, 0.4 * l].into_iter().flat_map(move |a| [0.0, 1.0, 2.0].map(|b| (l, a, b))))
            .collect(),
    };
    writeln!(out, "lambda,a,b,closed_form,rate_shifted_form,mc_mean,mc_std_error,z_score").map_err(io_err)?;
    for (k, &(l, a, b)) in points.iter().enumerate() {
        let closed = exp_integral_expectation(l, a, b).map_err(|e| e.to_string())?;
        let shifted = exp_integral_rate_shifted(l, a, b).map_err(|e| e.to_string())?;
        let (mean, se) = exp_integral_monte_carlo(l, a, b, args.samples, args.seed.wrapping_add(k as u64));
        writeln!(out, "{l},{a},{b},{closed:.10},{shifted:.10},{mean:.10},{se:.3e},{:.2}", (mean - closed) / se)
            .map_err(io_err)?;
    }
    Ok(EXIT_OK)
}
