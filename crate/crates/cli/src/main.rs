//! `flarebench`: batch front end over `flarebench_core::batch`.
//!
//! Every subcommand reads a `key = value` config file; flags override it.
//! Success prints a JSON summary on stdout, failure a JSON error on stderr
//! with a nonzero exit status.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use flarebench_core::batch::{self, Command};
use flarebench_core::io::RunConfig;
use flarebench_core::Error;

#[derive(Parser)]
#[command(
    name = "flarebench",
    version,
    about = "Magnetogram patch preprocessing and flare forecast verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Turn patch bundles into fixed-size PGM images.
    Preprocess(Common),
    /// Label gated patches against a flare catalog.
    Label(Common),
    /// Assign partitions, undersample NF and write the manifest.
    Partition(Common),
    /// Write augmented copies of training FL patches.
    Augment(Common),
    /// Pick the CSS-maximising threshold from validation predictions.
    Calibrate(Common),
    /// Score predictions by longitude range and zone.
    Evaluate(Common),
    /// Collect evaluation reports into plot-ready series.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for both NF undersampling and augmentation noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Decision threshold in (0, 1).
    #[arg(long)]
    threshold: Option<f64>,
    /// Primary input of the subcommand (bundles, labels, manifest, predictions or reports).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::Preprocess(c) => (Command::Preprocess, c),
            Sub::Label(c) => (Command::Label, c),
            Sub::Partition(c) => (Command::Partition, c),
            Sub::Augment(c) => (Command::Augment, c),
            Sub::Calibrate(c) => (Command::Calibrate, c),
            Sub::Evaluate(c) => (Command::Evaluate, c),
            Sub::Report(c) => (Command::Report, c),
        }
    }
}

fn build_config(command: Command, args: Common) -> Result<RunConfig, Error> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(w) = args.workers {
        config.workers = w;
    }
    if let Some(s) = args.seed {
        config.sampling.seed = s;
        config.augment_seed = s;
    }
    if args.threshold.is_some() {
        config.threshold = args.threshold;
    }
    if let Some(input) = args.input {
        let slot = match command {
            Command::Preprocess | Command::Label => &mut config.bundles,
            Command::Partition => &mut config.labels,
            Command::Augment => &mut config.manifest,
            Command::Calibrate | Command::Evaluate => &mut config.predictions,
            Command::Report => &mut config.reports,
        };
        *slot = Some(input);
    }
    if args.output.is_some() {
        config.output = args.output;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let (command, args) = Cli::parse().command.split();
    let result = build_config(command, args).and_then(|c| batch::run(command, &c));
    match result {
        Ok(summary) => {
            let outputs: Vec<Value> = summary
                .outputs
                .iter()
                .map(|p| Value::String(p.display().to_string()))
                .collect();
            let report = json!({
                "status": "ok",
                "command": command.as_str(),
                "outputs": outputs,
                "stats": summary.stats,
            });
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = json!({
                "status": "error",
                "command": command.as_str(),
                "kind": e.kind(),
                "error": e.to_string(),
            });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
