use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ialf_sim::config::{parse_mc_mode, SweepConfig};
use ialf_sim::sweep::{compare_files, run_sweep, write_csv, SweepError, DEFAULT_THRESHOLD};

const EXIT_CONFIG: u8 = 1;
const EXIT_THRESHOLD: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Closed-form and Monte Carlo rate sweeps for interference alignment with
/// limited feedback.
#[derive(Debug, Parser)]
#[command(name = "ialf", version)]
struct Args {
    /// Sweep configuration file.
    #[arg(long, value_name = "PATH", required_unless_present = "compare")]
    config: Option<PathBuf>,
    /// CSV destination; overrides `output` in the config. Defaults to stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Monte Carlo trials per grid point (0 = theory only).
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "MODE", value_parser = parse_mc_mode)]
    mc_mode: Option<ialf_sim::mcsim::McMode>,
    /// Compare the theory column of the first file with the simulated
    /// column of the second.
    #[arg(long, num_args = 2, value_names = ["THEORY.csv", "MC.csv"], conflicts_with = "config")]
    compare: Option<Vec<PathBuf>>,
    /// Largest relative deviation accepted by --compare, in percent.
    #[arg(long, value_name = "PCT", default_value_t = DEFAULT_THRESHOLD * 100.0)]
    threshold: f64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match &args.compare {
        Some(files) => compare(&files[0], &files[1], args.threshold),
        None => sweep(&args),
    }
}

fn compare(theory: &PathBuf, mc: &PathBuf, threshold_pct: f64) -> ExitCode {
    if !(threshold_pct.is_finite() && threshold_pct >= 0.0) {
        eprintln!("error: --threshold must be a nonnegative percentage");
        return ExitCode::from(EXIT_CONFIG);
    }
    let summary = match compare_files(theory, mc) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    print!("{}", summary.render());
    if summary.exceeds(threshold_pct / 100.0) {
        eprintln!(
            "max relative deviation {:.4}% exceeds threshold {threshold_pct}%",
            100.0 * summary.max_deviation()
        );
        return ExitCode::from(EXIT_THRESHOLD);
    }
    ExitCode::SUCCESS
}

fn sweep(args: &Args) -> ExitCode {
    let path = args.config.as_ref().expect("clap requires --config without --compare");
    let mut config = match SweepConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = args.mc_mode {
        config.mc_mode = mode;
    }
    let rows = match run_sweep(&config) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_infeasible() { EXIT_INFEASIBLE } else { EXIT_CONFIG });
        }
    };
    let written = match args.out.as_ref().or(config.output.as_ref()) {
        Some(out) => File::create(out).map_err(SweepError::from).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_csv(&rows, &mut w)?;
            w.flush().map_err(SweepError::from)
        }),
        None => write_csv(&rows, io::stdout().lock()),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
