//! Command-line laboratory for blow-up dynamics.
//!
//! `blowup <experiment> --config <path> [--out <dir>] [--workers N] [--force]`
//!
//! Exit codes: 0 success, 1 usage error, 2 contract violation.

mod config;
mod csvio;
mod experiments;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use experiments::RunContext;

#[derive(Parser)]
#[command(name = "blowup", version, about = "Numerical laboratory for blow-up dynamics")]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Clone, clap::Args)]
struct CommonArgs {
    /// Experiment configuration (TOML; a run's .meta.toml also works).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $BLOWUP_OUT or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Override the domination gate (logged).
    #[arg(long, default_value_t = false)]
    force: bool,
}

#[derive(Subcommand)]
enum Experiment {
    /// Uncontrolled scalar blow-up with time extrapolation.
    Ode(CommonArgs),
    /// Scalar controlled explosion: neutral window, reflection, periods.
    ControlOde(CommonArgs),
    /// Radial Dirichlet solve of the interior absorption problem.
    Elliptic(CommonArgs),
    /// Keller-Osserman large solution on the ball.
    Large(CommonArgs),
    /// Dynamic-boundary evolution with blow-up rate diagnostics.
    Dynbc(CommonArgs),
    /// Controlled dynamic-boundary run with comparison certificates.
    ControlPde(CommonArgs),
    /// Exact self-similar solution sampling.
    Selfsim(CommonArgs),
    /// Parameter sweep of dynamic-boundary evolutions.
    Sweep(CommonArgs),
    /// Built-in invariant battery.
    Check,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let (name, args): (&str, &CommonArgs) = match &cli.experiment {
        Experiment::Check => {
            let failures = selftest::run_all();
            return if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) };
        }
        Experiment::Ode(a) => ("ode", a),
        Experiment::ControlOde(a) => ("control-ode", a),
        Experiment::Elliptic(a) => ("elliptic", a),
        Experiment::Large(a) => ("large", a),
        Experiment::Dynbc(a) => ("dynbc", a),
        Experiment::ControlPde(a) => ("control-pde", a),
        Experiment::Selfsim(a) => ("selfsim", a),
        Experiment::Sweep(a) => ("sweep", a),
    };

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let config = match config::load_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };

    let out_dir = args
        .out
        .clone()
        .or_else(|| std::env::var_os("BLOWUP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = RunContext { out_dir: &out_dir, workers: args.workers, force: args.force };

    let outcome = match name {
        "ode" => experiments::run_ode(&config, &ctx),
        "control-ode" => experiments::run_control_ode(&config, &ctx),
        "elliptic" => experiments::run_elliptic(&config, &ctx),
        "large" => experiments::run_large(&config, &ctx),
        "dynbc" => experiments::run_dynbc(&config, &ctx),
        "control-pde" => experiments::run_control_pde(&config, &ctx),
        "selfsim" => experiments::run_selfsim(&config, &ctx),
        "sweep" => experiments::run_sweep(&config, &ctx),
        _ => unreachable!(),
    };

    match outcome {
        Ok(()) => {
            println!("wrote artifacts to {}", out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            // solver contract violations exit 2; config/plumbing exit 1
            let is_contract = e.downcast_ref::<blowup_core::Error>().is_some();
            eprintln!("error: {e:#}");
            ExitCode::from(if is_contract { 2 } else { 1 })
        }
    }
}
