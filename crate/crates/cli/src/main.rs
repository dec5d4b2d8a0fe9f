use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use explore_cli::{av, cmc, runs};
use explore_core::cmc::Strategy;

#[derive(Parser)]
#[command(name = "explore", version, about = "Information-gain exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore controllable Markov chains (dense worlds or mazes).
    Cmc(CmcArgs),
    /// Train active-vision agents from a JSON experiment file.
    Av {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Cells run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Rank strategies by a metric across seeds.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        metric: String,
        /// Logged step or epoch; defaults to the last one.
        #[arg(long)]
        step: Option<u64>,
        /// Largest mean first.
        #[arg(long)]
        descending: bool,
    },
}

#[derive(clap::Args)]
struct CmcArgs {
    /// Experiment file; replaces every other experiment flag.
    #[arg(long, conflicts_with_all = ["env", "size", "steps", "strategy", "seeds", "beta", "actions", "log_every"])]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    env: Option<cmc::EnvKind>,
    /// States (dense) or maze side length.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', default_value = "bas,random,boltzmann")]
    strategy: Vec<Strategy>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Actions per state of a dense world.
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    log_every: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn cmc_experiment(a: &CmcArgs) -> Result<cmc::CmcExperiment> {
    if let Some(path) = &a.config {
        return cmc::load(path);
    }
    let (Some(env), Some(size), Some(steps)) = (a.env, a.size, a.steps) else {
        bail!("--env, --size and --steps are required without --config");
    };
    let mut exp = cmc::CmcExperiment::with_defaults(env, size, steps, a.strategy.clone(), a.seeds.clone());
    if let Some(b) = a.beta {
        exp.beta = b;
    }
    if let Some(n) = a.actions {
        exp.actions = n;
    }
    if let Some(n) = a.log_every {
        exp.log_every = n;
    }
    exp.validate()?;
    Ok(exp)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Cmc(args) => {
            let exp = cmc_experiment(&args)?;
            cmc::run(&exp, &args.out, args.jobs)
        }
        Command::Av { config, out, jobs } => {
            let (exp, base) = av::load(&config)?;
            av::run(&exp, &base, &out, jobs)
        }
        Command::Report { input, metric, step, descending } => {
            let rankings = runs::compare(&input, &metric, step, descending)
                .with_context(|| format!("comparing runs in {}", input.display()))?;
            runs::write_rankings(std::io::stdout().lock(), &rankings)
        }
    }
}
