//! `wearcast` — generate synthetic milling campaigns, validate stored
//! datasets, and run the transfer-evaluation scenarios end to end.
//!
//! Every command is driven by one TOML experiment config (all fields
//! optional; defaults reproduce the standard campaign) plus a few flag
//! overrides. Exit codes: 0 on success, 1 when `validate` finds dataset
//! violations, 2 on any runtime error, including unusable configs.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use wearcast_core::dataset::export_dataset_csv;
use wearcast_core::experiment::{
    cmd_generate, cmd_report, cmd_run, cmd_validate, load_config, ExperimentConfig,
};

#[derive(Debug, Parser)]
#[command(name = "wearcast", version, about = "Flank-wear estimation experiments on milling force/torque signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic campaign onto disk.
    Generate(GenerateArgs),
    /// Check a stored dataset for consistency and label violations.
    Validate(ValidateArgs),
    /// Preprocess the dataset and run every configured scenario.
    Run(RunArgs),
    /// Re-render the summary of a finished run from its output directory.
    Report(ReportArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed override; wins over the config and the environment.
    #[arg(long, env = "WEARCAST_SEED", value_name = "SEED")]
    seed: Option<u64>,
}

impl CommonArgs {
    /// Loads the config (or the defaults) and applies the seed override.
    fn load(&self) -> wearcast_core::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Write the dataset here instead of the configured path.
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,

    /// Also write one human-readable CSV per cut next to its binaries.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Dataset directory to check instead of the configured one.
    #[arg(value_name = "DATASET")]
    dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Write reports here instead of the configured output directory.
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,

    /// Scenarios to run concurrently; warm-start chains stay together.
    #[arg(long, default_value_t = 1, value_name = "N")]
    jobs: usize,

    /// Model input window in time steps.
    #[arg(long, value_name = "STEPS")]
    window_length: Option<usize>,

    /// Write per-cut prediction CSVs even if the config disables them.
    #[arg(long, overrides_with = "no_csv")]
    csv: bool,

    /// Skip the per-cut prediction CSVs.
    #[arg(long)]
    no_csv: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Read the run from here instead of the configured output directory.
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> wearcast_core::Result<ExitCode> {
    match command {
        Command::Generate(args) => {
            let mut config = args.common.load()?;
            if let Some(dir) = args.output {
                config.dataset.path = dir;
            }
            let summary = cmd_generate(&config)?;
            print!("{}", summary.render_text());
            if args.csv {
                let written = export_dataset_csv(&config.dataset.path)?;
                println!("wrote {written} cut CSVs");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let mut config = args.common.load()?;
            if let Some(dir) = args.dataset {
                config.dataset.path = dir;
            }
            let report = cmd_validate(&config)?;
            print!("{}", report.render_text());
            if report.error_count() > 0 {
                Ok(ExitCode::from(1))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Run(args) => {
            let mut config = args.common.load()?;
            if let Some(dir) = args.output {
                config.output.dir = dir;
            }
            if let Some(steps) = args.window_length {
                config.preprocess.window_steps = steps;
            }
            if args.csv {
                config.output.per_cut_csv = true;
            } else if args.no_csv {
                config.output.per_cut_csv = false;
            }
            let summary = cmd_run(&config, args.jobs)?;
            print!("{}", summary.render_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            let mut config = args.common.load()?;
            if let Some(dir) = args.output {
                config.output.dir = dir;
            }
            let summary = cmd_report(&config)?;
            print!("{}", summary.render_text());
            Ok(ExitCode::SUCCESS)
        }
    }
}
