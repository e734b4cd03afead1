use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tsdapt::config::{parse_metric, parse_transform, ExperimentConfig, Mode};
use tsdapt::sweep::{run_from_files, run_synthetic_sweep};
use tsdapt::RunError;

/// Class-conditional domain adaptation for time-series embeddings.
#[derive(Parser)]
#[command(name = "tsdapt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic sinusoidal noise sweep and write CSV + SVG reports.
    Sweep {
        /// Experiment config file (flat key = value lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for results.csv, summary.csv and the plot.
        #[arg(long)]
        out: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the transform kind (emd | semd | sinkhorn |
        /// sinkhorn_lpl1 | sinkhorn_l1l2 | coral).
        #[arg(long)]
        transform: Option<String>,
        /// Override the selection metric (cc | pc | mmd | kmmd | homm |
        /// coral | coral_jeff | coral_stein).
        #[arg(long)]
        metric: Option<String>,
    },
    /// Adapt and evaluate embeddings supplied as files.
    Adapt {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Target-domain training embeddings file.
        #[arg(long)]
        target: PathBuf,
        /// Source-domain adaptation embeddings file.
        #[arg(long)]
        adapt: PathBuf,
        /// Source-domain validation embeddings file.
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        transform: Option<String>,
        #[arg(long)]
        metric: Option<String>,
    },
}

fn load_config(
    path: &Option<PathBuf>,
    seed: Option<u64>,
    transform: &Option<String>,
    metric: &Option<String>,
    expected_mode: Mode,
) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(mode) = cfg.mode {
        if mode != expected_mode {
            return Err(RunError::Config(format!(
                "config mode does not match the `{}` subcommand",
                match expected_mode {
                    Mode::SyntheticSweep => "sweep",
                    Mode::FromFiles => "adapt",
                }
            )));
        }
    }
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(t) = transform {
        cfg.transform = parse_transform(t)?;
    }
    if let Some(m) = metric {
        cfg.metric = parse_metric(m, &cfg.metric)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Sweep {
            config,
            out,
            seed,
            transform,
            metric,
        } => {
            let cfg = load_config(&config, seed, &transform, &metric, Mode::SyntheticSweep)?;
            let output = run_synthetic_sweep(&cfg, &out)?;
            println!(
                "sweep complete: {} rows -> {}",
                output.rows.len(),
                out.join("results.csv").display()
            );
            Ok(())
        }
        Command::Adapt {
            config,
            target,
            adapt,
            val,
            out,
            seed,
            transform,
            metric,
        } => {
            let cfg = load_config(&config, seed, &transform, &metric, Mode::FromFiles)?;
            let rows = run_from_files(
                &cfg,
                &target,
                &adapt,
                &val,
                &out,
                seed.unwrap_or_else(|| cfg.seeds.first().copied().unwrap_or(0)),
            )?;
            for row in &rows {
                println!("{}: accuracy {}", row.bound.as_str(), row.accuracy);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
