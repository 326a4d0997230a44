//! `lsvlab <experiment> --config run.json [--seed N] [--out DIR]`
//!
//! Runs one experiment described by a JSON config, writes its CSV series and
//! `summary.json` to the output directory and prints the fit summary.
//! Exit status: 0 when every assertion holds, 1 when one fails, 2 on errors.
//! `LSVLAB_THREADS` sets the number of worker threads.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use lsv_core::config::read_config;
use lsv_core::runner::{run, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "lsvlab", version, about = "Experiments with nonstationary intermittent maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entry and return partition points.
    Partition(RunArgs),
    /// Push a density forward through the sequence.
    Density(RunArgs),
    /// Total variation between two evolved densities.
    MemoryLoss(RunArgs),
    /// Moment growth of centered sums.
    Moments(RunArgs),
    /// Tail of the running maximum at a fixed time.
    Tails(RunArgs),
    /// Large and moderate deviation probabilities.
    Deviations(RunArgs),
    /// Periodic three-state chain.
    Counterexample(RunArgs),
    /// Exact and Monte Carlo renewal tails.
    RenewalTails(RunArgs),
    /// Quadratic variation moment ratios.
    QvCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Partition(a) => ("partition", a),
            Command::Density(a) => ("density", a),
            Command::MemoryLoss(a) => ("memory-loss", a),
            Command::Moments(a) => ("moments", a),
            Command::Tails(a) => ("tails", a),
            Command::Deviations(a) => ("deviations", a),
            Command::Counterexample(a) => ("counterexample", a),
            Command::RenewalTails(a) => ("renewal-tails", a),
            Command::QvCheck(a) => ("qv-check", a),
        }
    }
}

fn threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("LSVLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("LSVLAB_THREADS={v:?} is not a count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    threads()?;
    let (name, args) = cli.command.parts();
    let mut cfg = read_config(&args.config)?;
    if cfg.experiment.name() != name {
        bail!(
            "{} describes a `{}` run, not `{name}`",
            args.config.display(),
            cfg.experiment.name()
        );
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let cwd = std::env::current_dir()?;
    if let Some(out) = &args.out {
        cfg.output = cwd.join(out);
    }
    let base = args.config.parent().map_or(Path::new("."), |p| p);
    let base = cwd.join(base);
    let outcome = run(&cfg, &base)?;
    print!("{}", outcome.summary_text());
    println!("  wrote {} and {}", outcome.csv.display(), outcome.summary.display());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
