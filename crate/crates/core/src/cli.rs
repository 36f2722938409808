//! `fedsim` command line. Exit status 0 on success, 2 for configuration
//! and usage errors, 1 for anything that fails while running.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::load_experiment;
use crate::cost_model::{self, log_grid, sweep_curve};
use crate::error::{Error, Result};
use crate::federation::run_experiment;
use crate::presets::{self, Figure, Source};
use crate::report;

pub const SEED_ENV: &str = "FEDSIM_SEED";

#[derive(Debug, Parser)]
#[command(name = "fedsim", version, about = "Federated training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment file; writes rounds.csv and summary.csv.
    Run { config: PathBuf },
    /// Run a figure's preset grid and write one CSV per curve.
    Replicate(ReplicateArgs),
    /// Print the centralized/federated time ratio over a grid as CSV.
    Cost(CostArgs),
}

#[derive(Debug, Args)]
struct ReplicateArgs {
    /// fig4, fig6, fig7, fig8, fig9 or fig10.
    figure: String,
    /// Directory with the four uncompressed MNIST IDX files.
    #[arg(long, value_name = "DIR", conflicts_with = "synthetic")]
    mnist: Option<PathBuf>,
    /// Use Gaussian blobs instead of MNIST (the default).
    #[arg(long)]
    synthetic: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CostArgs {
    /// Agency counts, comma-separated.
    #[arg(long = "A", value_delimiter = ',', default_values_t = cost_model::DEFAULT_AGENCIES)]
    agencies: Vec<usize>,
    /// Model reduction ratio.
    #[arg(long = "Mr", default_value_t = cost_model::DEFAULT_MODEL_REDUCTION)]
    model_reduction: f64,
    /// A single N value instead of a grid.
    #[arg(long = "N", conflicts_with_all = ["n_min", "n_max", "n_steps"])]
    n: Option<f64>,
    #[arg(long = "N-min", default_value_t = cost_model::DEFAULT_N_RANGE.0)]
    n_min: f64,
    #[arg(long = "N-max", default_value_t = cost_model::DEFAULT_N_RANGE.1)]
    n_max: f64,
    #[arg(long = "N-steps", default_value_t = cost_model::DEFAULT_N_STEPS)]
    n_steps: usize,
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let seed = std::env::var(SEED_ENV).ok();
    run(std::env::args_os(), seed.as_deref(), &mut std::io::stdout())
}

/// Runs the CLI with explicit arguments, seed override and stdout.
pub fn run<I, T>(args: I, seed_override: Option<&str>, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command, seed_override, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fedsim: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn parse_seed(value: Option<&str>) -> Result<Option<u64>> {
    value
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}: `{v}` is not an unsigned integer")))
        })
        .transpose()
}

fn dispatch(command: Command, seed_override: Option<&str>, stdout: &mut dyn Write) -> Result<()> {
    let seed = parse_seed(seed_override)?;
    match command {
        Command::Run { config } => cmd_run(&config, seed),
        Command::Replicate(args) => cmd_replicate(args, seed),
        Command::Cost(args) => cmd_cost(args, stdout),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_run(path: &Path, seed: Option<u64>) -> Result<()> {
    let mut exp = load_experiment(path)?;
    if let Some(s) = seed {
        exp.override_seed(s);
    }
    let (train, test) = exp.load_data()?;
    let config = exp.federation_config(&train, &test)?;
    let out = run_experiment(&config, &train, &test)?;
    create_dir(&exp.output_dir)?;
    report::write_rounds(&exp.output_dir.join("rounds.csv"), &out.records)?;
    report::write_summary(&exp.output_dir.join("summary.csv"), &out)?;
    eprintln!(
        "{} {}: final accuracy {:.4}, {} bytes, sim time {:.4} -> {}",
        config.flavor,
        config.network,
        out.final_accuracy(),
        out.ledger.total_bytes(),
        out.final_record().sim_time,
        exp.output_dir.display()
    );
    Ok(())
}

fn cmd_replicate(args: ReplicateArgs, seed: Option<u64>) -> Result<()> {
    let figure: Figure = args.figure.parse()?;
    if args.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let source = match args.mnist {
        Some(dir) => Source::Mnist(dir),
        None => Source::Synthetic,
    };
    let seed = seed.unwrap_or(args.seed);
    let curves = if figure.needs_data() {
        let (train, test) = presets::figure_data(&source, seed)?;
        let mut base = presets::figure_config(&source, train.dim(), seed)?;
        base.workers = args.workers;
        presets::run_figure(figure, &base, &train, &test)?
    } else {
        presets::cost_curves()?
    };
    create_dir(&args.out)?;
    for curve in &curves {
        let path = report::write_curve(&args.out, curve)?;
        match curve.final_accuracy() {
            Some(acc) => eprintln!("{}: final accuracy {acc:.4}", path.display()),
            None => eprintln!("{}", path.display()),
        }
    }
    Ok(())
}

fn cmd_cost(args: CostArgs, stdout: &mut dyn Write) -> Result<()> {
    let invalid = |e: Error| Error::Config(e.to_string());
    let grid = match args.n {
        Some(n) => vec![n],
        None => log_grid(args.n_min, args.n_max, args.n_steps).map_err(invalid)?,
    };
    if let Some(bad) = grid.iter().find(|n| !(n.is_finite() && **n >= 0.0)) {
        return Err(Error::Config(format!(
            "N must be finite and non-negative, got {bad}"
        )));
    }
    let rows = sweep_curve(&grid, &args.agencies, args.model_reduction).map_err(invalid)?;
    report::write_cost_rows(stdout, &rows)
}
