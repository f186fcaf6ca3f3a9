//! Command-line driver. Defaults, an optional JSON config file, flags, and
//! the FINMEAS_SEED environment override merge into an experiment manifest
//! (later sources win); the finished run writes manifest.json, rows.csv, and
//! summary.json under the output directory. Exit codes: 0 success, 2 config
//! or I/O error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use finmeas_core::experiments::{
    analytic_record, born_convergence_experiment, equilibration_experiment,
    irreversibility_experiment, typicality_experiment, ExperimentManifest, RunRecord, Summary,
};
use finmeas_core::model::Metric;
use finmeas_core::Error as CoreError;

mod selftest;

#[derive(Parser)]
#[command(
    name = "finmeas",
    version,
    about = "Measurement experiments on block random-matrix models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble-averaged distance to the average equilibrium state over time
    Equilibrate(RunArgs),
    /// Spread of the equilibrium pointer probability across model draws
    Typicality(RunArgs),
    /// Imperfect time reversal across coupling strengths
    Reverse(RunArgs),
    /// Sampled check of the closed-form outcome probabilities across sizes
    Born(RunArgs),
    /// Closed-form outcome probabilities, no sampling
    Analytic(RunArgs),
    /// Built-in numerical cross-checks
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flat keys mirror the flags, flags win
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Apparatus size (even, 2..=16)
    #[arg(long)]
    n: Option<usize>,
    /// Coupling strength
    #[arg(long)]
    epsilon: Option<f64>,
    /// Spin amplitudes as two RE,IM pairs, plus component first
    #[arg(long, num_args = 2, value_name = "RE,IM", value_parser = parse_pair)]
    spin: Option<Vec<(f64, f64)>>,
    /// Sample count
    #[arg(long)]
    samples: Option<usize>,
    /// Base RNG seed (FINMEAS_SEED overrides)
    #[arg(long)]
    seed: Option<u64>,
    /// First time-grid point
    #[arg(long)]
    tmin: Option<f64>,
    /// Last time-grid point
    #[arg(long)]
    tmax: Option<f64>,
    /// Number of time-grid points
    #[arg(long)]
    tpoints: Option<usize>,
    /// Log-spaced time grid (the default)
    #[arg(long, conflicts_with = "linear")]
    log: bool,
    /// Linearly spaced time grid
    #[arg(long)]
    linear: bool,
    /// Distance metric: trace or frobenius
    #[arg(long)]
    metric: Option<Metric>,
    /// Deviation threshold for the typicality tail count
    #[arg(long)]
    delta: Option<f64>,
    /// Coupling strengths for the reversal sweep, comma separated
    #[arg(long, value_delimiter = ',')]
    epsilon_list: Option<Vec<f64>>,
    /// Reversal time (autodetected when omitted)
    #[arg(long)]
    t_reverse: Option<f64>,
    /// Independent apparatus Hamiltonian draws (equilibrate)
    #[arg(long)]
    h0_draws: Option<usize>,
    /// Apparatus sizes for the convergence table, comma separated
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Output directory (default runs/<subcommand>)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker thread cap, 0 = auto
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Base RNG seed (FINMEAS_SEED overrides)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap, 0 = auto
    #[arg(long)]
    threads: Option<usize>,
}

/// Flat JSON config; every key optional, unknown keys rejected. An emitted
/// manifest.json parses as-is, so a run can be replayed with --config.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    experiment: Option<String>,
    version: Option<String>,
    seed: Option<u64>,
    n: Option<usize>,
    epsilon: Option<f64>,
    spin: Option<[[f64; 2]; 2]>,
    n_samples: Option<usize>,
    tmin: Option<f64>,
    tmax: Option<f64>,
    tpoints: Option<usize>,
    log_spacing: Option<bool>,
    metric: Option<Metric>,
    delta: Option<f64>,
    epsilon_list: Option<Vec<f64>>,
    t_reverse: Option<f64>,
    h0_draws: Option<usize>,
    n_list: Option<Vec<usize>>,
    out: Option<PathBuf>,
}

enum CliError {
    Config(String),
    Numeric(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::InvalidDimension
            | CoreError::InvalidParameter(_)
            | CoreError::Io(_)
            | CoreError::Json(_)
            | CoreError::Csv(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| format!("expected RE,IM, got {s:?}"))?;
    let re: f64 = re
        .trim()
        .parse()
        .map_err(|_| format!("bad real part {re:?}"))?;
    let im: f64 = im
        .trim()
        .parse()
        .map_err(|_| format!("bad imaginary part {im:?}"))?;
    Ok((re, im))
}

fn default_manifest(name: &str) -> ExperimentManifest {
    let (n, n_samples) = match name {
        "equilibrate" => (8, 200),
        "typicality" => (6, 200),
        "reverse" => (6, 50),
        "born" => (8, 200),
        "analytic" => (8, 1),
        other => unreachable!("no defaults for {other}"),
    };
    ExperimentManifest {
        experiment: name.into(),
        version: "1".into(),
        seed: 42,
        n,
        epsilon: 0.1,
        spin: [[0.5, 0.0], [3f64.sqrt() / 2.0, 0.0]],
        n_samples,
        tmin: 1e-3,
        tmax: 1e3,
        tpoints: 200,
        log_spacing: true,
        metric: Metric::Trace,
        delta: None,
        epsilon_list: None,
        t_reverse: None,
        h0_draws: None,
        n_list: None,
    }
}

fn build_manifest(
    name: &str,
    args: &RunArgs,
) -> Result<(ExperimentManifest, PathBuf), CliError> {
    let mut man = default_manifest(name);
    let mut out: Option<PathBuf> = None;

    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: FileConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?;
        if let Some(v) = file.version {
            man.version = v;
        }
        if let Some(v) = file.seed {
            man.seed = v;
        }
        if let Some(v) = file.n {
            man.n = v;
        }
        if let Some(v) = file.epsilon {
            man.epsilon = v;
        }
        if let Some(v) = file.spin {
            man.spin = v;
        }
        if let Some(v) = file.n_samples {
            man.n_samples = v;
        }
        if let Some(v) = file.tmin {
            man.tmin = v;
        }
        if let Some(v) = file.tmax {
            man.tmax = v;
        }
        if let Some(v) = file.tpoints {
            man.tpoints = v;
        }
        if let Some(v) = file.log_spacing {
            man.log_spacing = v;
        }
        if let Some(v) = file.metric {
            man.metric = v;
        }
        if let Some(v) = file.delta {
            man.delta = Some(v);
        }
        if let Some(v) = file.epsilon_list {
            man.epsilon_list = Some(v);
        }
        if let Some(v) = file.t_reverse {
            man.t_reverse = Some(v);
        }
        if let Some(v) = file.h0_draws {
            man.h0_draws = Some(v);
        }
        if let Some(v) = file.n_list {
            man.n_list = Some(v);
        }
        if let Some(v) = file.out {
            out = Some(v);
        }
        let _ = file.experiment;
    }

    if let Some(v) = args.n {
        man.n = v;
    }
    if let Some(v) = args.epsilon {
        man.epsilon = v;
    }
    if let Some(pairs) = &args.spin {
        man.spin = [[pairs[0].0, pairs[0].1], [pairs[1].0, pairs[1].1]];
    }
    if let Some(v) = args.samples {
        man.n_samples = v;
    }
    if let Some(v) = args.seed {
        man.seed = v;
    }
    if let Some(v) = args.tmin {
        man.tmin = v;
    }
    if let Some(v) = args.tmax {
        man.tmax = v;
    }
    if let Some(v) = args.tpoints {
        man.tpoints = v;
    }
    if args.log {
        man.log_spacing = true;
    }
    if args.linear {
        man.log_spacing = false;
    }
    if let Some(v) = args.metric {
        man.metric = v;
    }
    if let Some(v) = args.delta {
        man.delta = Some(v);
    }
    if let Some(v) = &args.epsilon_list {
        man.epsilon_list = Some(v.clone());
    }
    if let Some(v) = args.t_reverse {
        man.t_reverse = Some(v);
    }
    if let Some(v) = args.h0_draws {
        man.h0_draws = Some(v);
    }
    if let Some(v) = &args.n_list {
        man.n_list = Some(v.clone());
    }
    if let Some(v) = &args.out {
        out = Some(v.clone());
    }

    man.seed = seed_override(man.seed)?;
    normalize_spin(&mut man)?;

    let out = out.unwrap_or_else(|| PathBuf::from("runs").join(name));
    Ok((man, out))
}

fn seed_override(current: u64) -> Result<u64, CliError> {
    match std::env::var("FINMEAS_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("FINMEAS_SEED must be a u64, got {s:?}"))),
        Err(_) => Ok(current),
    }
}

/// Store unit-norm amplitudes in the manifest; warn when the input was off
/// by more than 1e-6. Amplitudes already unit to 1e-12 pass through
/// untouched so a replayed manifest stays byte-identical.
fn normalize_spin(man: &mut ExperimentManifest) -> Result<(), CliError> {
    let flat: Vec<f64> = man.spin.iter().flatten().copied().collect();
    if flat.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Config("spin amplitudes must be finite".into()));
    }
    let norm = flat.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(CliError::Config(
            "spin amplitudes must not all be zero".into(),
        ));
    }
    let off = (norm - 1.0).abs();
    if off <= 1e-12 {
        return Ok(());
    }
    if off > 1e-6 {
        eprintln!("warning: spin norm off by {off:.3e}, renormalizing");
    }
    for pair in &mut man.spin {
        pair[0] /= norm;
        pair[1] /= norm;
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn setup_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn setup_threads(_threads: Option<usize>) {}

fn dispatch(name: &str, man: &ExperimentManifest) -> Result<RunRecord, CoreError> {
    match name {
        "equilibrate" => equilibration_experiment(man),
        "typicality" => typicality_experiment(man),
        "reverse" => irreversibility_experiment(man),
        "born" => born_convergence_experiment(man),
        "analytic" => analytic_record(man),
        other => unreachable!("no experiment named {other}"),
    }
}

fn print_summary(record: &RunRecord) {
    match &record.summary {
        Summary::Analytic(s) => {
            println!("N = {} (d0 = {}, d1 = {})", s.n, s.d0, s.d1);
            println!("p_plus_inf  = {}", s.p_plus);
            println!("p_zero_inf  = {}", s.p_zero);
            println!("p_minus_inf = {}", s.p_minus);
        }
        Summary::Equilibrate(s) => {
            for c in &s.curves {
                println!(
                    "h0 {}: initial {:.6}, plateau {:.6}, onset {:.4}, flatness {:.4}",
                    c.h0_index, c.initial_distance, c.plateau, c.onset, c.flatness
                );
            }
        }
        Summary::Typicality(s) => {
            println!("analytic p_plus_inf = {}", s.analytic_p_plus);
            println!(
                "sampled mean {} +- {} (std {}), fraction beyond delta {}: {}",
                s.mean_p_plus_inf, s.stderr_p_plus_inf, s.std_p_plus_inf, s.delta,
                s.deviation_fraction
            );
        }
        Summary::Reverse(s) => {
            println!("t_reverse = {}", s.t_reverse);
            for e in &s.per_epsilon {
                println!(
                    "epsilon {}: median trace distance {:.6}, frobenius {:.6}",
                    e.epsilon, e.median_trace_distance, e.median_frobenius_distance
                );
            }
        }
        Summary::Born(s) => {
            for e in &s.entries {
                println!(
                    "N {}: analytic {} sampled {} +- {} (textbook gap {:.4})",
                    e.n, e.analytic_p_plus, e.mc_mean, e.mc_stderr, e.textbook_gap
                );
            }
        }
    }
}

fn run_experiment(name: &'static str, args: &RunArgs) -> Result<(), CliError> {
    setup_threads(args.threads);
    let (man, out) = build_manifest(name, args)?;
    let record = dispatch(name, &man)?;
    record.write_to_dir(&out)?;
    print_summary(&record);
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn run_selftest(args: &SelftestArgs) -> Result<(), CliError> {
    setup_threads(args.threads);
    let seed = seed_override(args.seed.unwrap_or(42))?;
    selftest::run(seed).map_err(CliError::Numeric)
}

fn main() -> ExitCode {
    std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    let cli = Cli::parse();
    let start = Instant::now();
    let result = match &cli.command {
        Command::Equilibrate(a) => run_experiment("equilibrate", a),
        Command::Typicality(a) => run_experiment("typicality", a),
        Command::Reverse(a) => run_experiment("reverse", a),
        Command::Born(a) => run_experiment("born", a),
        Command::Analytic(a) => run_experiment("analytic", a),
        Command::Selftest(a) => run_selftest(a),
    };
    match result {
        Ok(()) => {
            eprintln!("wall time {:.2}s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
