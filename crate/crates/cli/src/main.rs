use std::path::PathBuf;
use std::process::ExitCode;

use adamcmc_cli::commands::{self, Context};
use adamcmc_cli::config::{Algorithm, ModelKind, PipelineConfig};
use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "adamcmc",
    version,
    about = "Delayed-acceptance MCMC pipeline with GP surrogates and particle filters"
)]
struct Cli {
    /// TOML configuration; unset keys take the model defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Model whose defaults to use when no configuration file is given.
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for particle-filter replicates.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overwrite existing artifacts.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the data set (or ingest `data.path`) into OUT/data.csv.
    Simulate,
    /// Run MCWM and store training proposals and the adapted proposal.
    Harvest,
    /// Fit the GP surrogate and the case selector.
    Fit,
    /// Run one sampler: pmcmc, mcwm, da or ada.
    Run { algorithm: Algorithm },
    /// Compare run directories against the first one.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Forward-simulate from the high-density region of a run's chain.
    Predict {
        #[arg(long, default_value = "ada")]
        algorithm: Algorithm,
    },
    /// simulate, harvest, fit, run, compare and predict in one go.
    Pipeline,
    /// Print the effective configuration as TOML.
    Config,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = PipelineConfig::load(path)?;
            if let Some(m) = cli.model {
                if m != cfg.model {
                    bail!("--model {m} conflicts with model = {} in {}", cfg.model, path.display());
                }
            }
            cfg
        }
        None => PipelineConfig::defaults(cli.model.unwrap_or(ModelKind::Ricker)),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = load_config(&cli)?;
    let ctx = Context::new(cfg, cli.out.clone(), cli.force);
    match cli.command {
        Command::Simulate => commands::simulate(&ctx).map(drop),
        Command::Harvest => commands::harvest(&ctx).map(drop),
        Command::Fit => commands::fit(&ctx).map(drop),
        Command::Run { algorithm } => commands::run(&ctx, algorithm).map(drop),
        Command::Compare { runs } => commands::compare(&runs, &cli.out, cli.force).map(drop),
        Command::Predict { algorithm } => commands::predict(&ctx, algorithm).map(drop),
        Command::Pipeline => commands::pipeline(&ctx),
        Command::Config => {
            print!("{}", ctx.cfg.to_toml_string()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
