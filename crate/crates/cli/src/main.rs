use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermodev::config::RunConfig;
use thermodev::{Error, Result};
use thermodev_cli::commands::{self, Overrides, CONFIG_ECHO};
use thermodev_cli::exit_code;

#[derive(Parser)]
#[command(name = "thermodev", version, about = "Bayesian fitting and comparison of thermal development-rate curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file (`temperature,rate`), overriding the config.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior of every configured model.
    Fit(Common),
    /// Criteria, evidence and ELBOs for every configured model.
    Compare(Common),
    /// Model weights and averaged thermal quantities from a compare directory.
    Bma {
        /// Directory written by `compare`.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a dataset from the first configured model.
    Simulate(Common),
    /// Posterior-predictive bands for a fitted model.
    Ppc {
        /// Model directory written by `fit`.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Marginal-likelihood estimates for every configured model.
    Evidence(Common),
}

/// Config from `--config`, else the echo left in `fallback`, with command
/// line overrides applied.
fn config(c: &Common, fallback: Option<&PathBuf>) -> Result<RunConfig> {
    let base = match (&c.config, fallback) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(dir)) if dir.join(CONFIG_ECHO).exists() => {
            let mut cfg = RunConfig::load(&dir.join(CONFIG_ECHO))?;
            cfg.output_dir = None;
            cfg
        }
        (None, _) => match c.seed {
            Some(seed) => RunConfig::new(seed),
            None => return Err(Error::Config("no configuration: pass --config (a seed is required)".into())),
        },
    };
    let cfg = Overrides { data: c.data.clone(), out: c.out.clone(), seed: c.seed }.apply(base);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Fit(c) | Command::Compare(c) | Command::Simulate(c) | Command::Evidence(c) => c,
        Command::Bma { common, .. } | Command::Ppc { common, .. } => common,
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Fit(c) => {
            for d in commands::cmd_fit(&config(c, None)?)? {
                println!("{}", d.display());
            }
        }
        Command::Compare(c) => println!("{}", commands::cmd_compare(&config(c, None)?)?.display()),
        Command::Evidence(c) => println!("{}", commands::cmd_evidence(&config(c, None)?)?.display()),
        Command::Simulate(c) => println!("{}", commands::cmd_simulate(&config(c, None)?)?.display()),
        Command::Bma { input, common } => println!("{}", commands::cmd_bma(input, &config(common, Some(input))?)?.display()),
        Command::Ppc { input, common } => println!("{}", commands::cmd_ppc(input, &config(common, Some(input))?)?.display()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
