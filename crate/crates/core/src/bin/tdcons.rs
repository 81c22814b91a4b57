use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use td_consumption::cli::{cmd_pretrain, cmd_report, cmd_run};
use td_consumption::config::{parse_seeds, Experiment, RunConfig};
use td_consumption::Result;

#[derive(Parser)]
#[command(name = "tdcons", version, about = "Temporal-difference consumption-savings agents")]
struct Cli {
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the benchmark and pretrain the network.
    Pretrain {
        /// Seed for weight initialization and minibatch order.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run experiments with a pretrained checkpoint.
    Run {
        #[arg(long, value_parser = ["mpc", "scarring", "extreme", "pessimism", "longrun", "all"])]
        experiment: Option<String>,
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Inclusive range, e.g. 1..10.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        classify_at: Option<usize>,
        #[arg(long)]
        smoothed: bool,
        #[arg(long)]
        literal_update_sign: bool,
        #[arg(long)]
        all_employed: bool,
        /// Checkpoint to load instead of `<out>/checkpoint.txt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare a run directory with the reference numbers.
    Report {
        /// Defaults to `--out`.
        dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Pretrain { seed } => {
            if let Some(s) = seed {
                cfg.params.seed = s;
            }
            let s = cmd_pretrain(&cfg, &cli.out)?;
            println!(
                "pretrained in {} epochs: held-out max error {:.3e}, time-0 policy gap {:.4}, Bellman residual {:.2e}",
                s.epochs, s.heldout_max_error, s.policy_sup_error, s.bellman_residual
            );
            println!("checkpoint: {}", s.checkpoint.display());
        }
        Command::Run {
            experiment,
            seed,
            seeds,
            classify_at,
            smoothed,
            literal_update_sign,
            all_employed,
            checkpoint,
        } => {
            if let Some(e) = experiment {
                cfg.experiment = Experiment::parse(&e)?;
            }
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(s) = seeds {
                cfg.seeds = parse_seeds(&s)?;
            }
            if let Some(c) = classify_at {
                cfg.classify_at = vec![c];
            }
            cfg.use_smoothed |= smoothed;
            cfg.literal_update_sign |= literal_update_sign;
            cfg.all_employed |= all_employed;
            cfg.validate()?;
            let s = cmd_run(&cfg, &cli.out, checkpoint.as_deref())?;
            println!("wrote {} files to {}", s.files.len(), cli.out.display());
        }
        Command::Report { dir } => {
            let report = cmd_report(dir.as_ref().unwrap_or(&cli.out))?;
            print!("{}", report.render());
            return Ok(report.all_pass());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
