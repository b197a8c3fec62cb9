mod config;
mod csvout;
mod error;
mod figure;
mod sample;
mod scaling;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, FileConfig};
use error::Result;

#[derive(Parser)]
#[command(
    name = "hmc",
    version,
    about = "Hamiltonian Monte Carlo experiment harness",
    long_about = "Runs MCMC chains, figure reproductions and scaling studies,\n\
                  writing deterministic CSV output for a given seed."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain and write trace.csv plus summary.csv
    Sample(SampleArgs),
    /// Reproduce a named figure as CSV
    Figure(FigureArgs),
    /// Tune and measure a method across dimensions
    Scaling(ScalingArgs),
    /// Run fast built-in correctness checks
    Selftest,
}

#[derive(Args)]
struct SampleArgs {
    /// Flat TOML config file; flags below override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed (mandatory here or in the config; no wall-clock seeding)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long)]
    out: Option<String>,
    /// One of: hmc, rwm, lmc, ghmc, windowed, tempered
    #[arg(long)]
    kernel: Option<String>,
    /// Target name, e.g. gauss1d, gauss2d_95, gauss2d_98, gauss100d, mixture_fig9
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    /// Iterations dropped from summaries (default 10% of iters)
    #[arg(long)]
    burn_in: Option<usize>,
    /// Stepsize range; for rwm this is the proposal standard deviation
    #[arg(long)]
    epsilon_lo: Option<f64>,
    #[arg(long)]
    epsilon_hi: Option<f64>,
    /// Leapfrog steps per trajectory
    #[arg(long)]
    steps_lo: Option<usize>,
    #[arg(long)]
    steps_hi: Option<usize>,
    /// Window size for the windowed kernel
    #[arg(long)]
    window: Option<usize>,
    /// Momentum temper factor for the tempered kernel
    #[arg(long)]
    alpha_temp: Option<f64>,
    /// Partial momentum refresh coefficient for ghmc
    #[arg(long)]
    alpha_ref: Option<f64>,
    /// Coordinates to write in the trace (default: all)
    #[arg(long, value_delimiter = ',')]
    monitor: Option<Vec<usize>>,
}

#[derive(Args)]
struct FigureArgs {
    /// One of: fig1, fig3, fig4, fig5, fig6, fig7, fig9
    figure_id: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ScalingArgs {
    /// One of: hmc, rwm, lmc
    method: String,
    /// Strictly ascending dimensions, e.g. 16,64,256
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(args) => {
            let file = match &args.config {
                Some(path) => FileConfig::load(path)?,
                None => FileConfig::default(),
            };
            let flags = FileConfig {
                target: args.target,
                kernel: args.kernel,
                iters: args.iters,
                burn_in: args.burn_in,
                seed: args.seed,
                out: args.out,
                epsilon_lo: args.epsilon_lo,
                epsilon_hi: args.epsilon_hi,
                steps_lo: args.steps_lo,
                steps_hi: args.steps_hi,
                window: args.window,
                alpha_temp: args.alpha_temp,
                alpha_ref: args.alpha_ref,
                monitor: args.monitor,
            };
            let cfg = ExperimentConfig::resolve(file, flags)?;
            sample::run(&cfg)
        }
        Command::Figure(args) => figure::run(&args.figure_id, args.seed, &args.out),
        Command::Scaling(args) => scaling::run(&args.method, &args.dims, args.seed, &args.out),
        Command::Selftest => selftest::run(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successes; everything else is a
            // configuration error (exit 1, not clap's default 2).
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
