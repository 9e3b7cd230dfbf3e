//! Command-line front end: configuration, file formats, and subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use robust_mem::mmd::BoundInputs;
use robust_mem::synthetic::Generator;

use crate::commands::{FitOverrides, SimulationFile};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "rmem", version, about = "Robust Bayesian regression with mismeasured covariates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (data.csv) and its truth (truth.json).
    Simulate(SimulateArgs),
    /// Fit a model and write samples.csv, summary.json, and band.csv.
    Fit(FitArgs),
    /// Evaluate the generalisation bound and its constants.
    Bounds(BoundsArgs),
    /// Summarize the columns of a samples CSV.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Linear,
    Sigmoid,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "linear")]
    pub kind: Kind,
    /// JSON with any of generator, n, theta0, sigma_eps2, sigma_nu2.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma_nu2: Option<f64>,
    #[arg(long)]
    pub sigma_eps2: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub c: f64,
    /// Bound on the conditional mean operator norm.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Covariate kernel lengthscale.
    #[arg(long, default_value_t = 1.0)]
    pub l: f64,
    #[arg(long)]
    pub sigma1: f64,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Comma-separated concentrations to tabulate.
    #[arg(long, value_delimiter = ',')]
    pub c_sweep: Vec<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// samples.csv produced by `fit`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => io::write_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value).expect("serializable value"));
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => {
            let file = match &a.config {
                Some(p) => commands::read_simulation_file(p)?,
                None => SimulationFile::default(),
            };
            let kind = match a.kind {
                Kind::Linear => Generator::Linear,
                Kind::Sigmoid => Generator::Sigmoid,
            };
            let mut cfg = file.resolve(kind);
            if let Some(n) = a.n {
                cfg.n = n;
            }
            if let Some(v) = a.sigma_nu2 {
                cfg.sigma_nu2 = v;
            }
            if let Some(v) = a.sigma_eps2 {
                cfg.sigma_eps2 = v;
            }
            commands::run_simulate(&cfg, a.seed, &a.out)
        }
        Command::Fit(a) => {
            let overrides = FitOverrides {
                seed: a.seed,
                workers: a.workers,
            };
            let ps = commands::run_fit(&a.config, &a.data, &a.out, &overrides)?;
            eprintln!(
                "wrote {} draws ({} failed iterations) to {}",
                ps.len(),
                ps.failures.len(),
                a.out.display()
            );
            Ok(())
        }
        Command::Bounds(a) => {
            let inputs = BoundInputs {
                n: a.n,
                c: a.c,
                lambda: a.lambda,
                l: a.l,
                sigma1: a.sigma1,
                sigma2: a.sigma2,
                d: a.d,
            };
            emit(&commands::run_bounds(inputs, &a.c_sweep)?, a.out.as_ref())
        }
        Command::Summarize(a) => emit(&commands::run_summarize(&a.data)?, a.out.as_ref()),
    }
}

/// Runs the tool and maps the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

