use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hybrid_aml::datagen::{generate, read_dataset, write_dataset};
use hybrid_aml::harness::{self, emit_table, write_json, EvaluationReport};
use hybrid_aml::rgcn::Checkpoint;
use hybrid_aml::{ErrorClass, ExperimentConfig, FeatureMode};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_TRAINING: u8 = 4;
const EXIT_GATE: u8 = 5;

#[derive(Parser)]
#[command(name = "hybrid-aml", version, about = "Synthetic vs hybrid AML transaction classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate accounts.csv and transactions.csv.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the generator seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one arm and write the data, model.json, graph.json and the report.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model on a dataset directory.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test", value_parser = ["test", "val", "train", "all"])]
        split: String,
    },
    /// Train both arms over every configured seed and compare them.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit with status 5 unless mean AUC(hybrid) - mean AUC(synthetic) >= X.
        #[arg(long, value_name = "X", allow_negative_numbers = true)]
        assert_delta: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Synthetic,
    Hybrid,
}

impl From<ModeArg> for FeatureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Synthetic => FeatureMode::Synthetic,
            ModeArg::Hybrid => FeatureMode::Hybrid,
        }
    }
}

/// Metric gate failure; carries its own exit status.
#[derive(Debug)]
struct GateFailure(String);

impl std::fmt::Display for GateFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for GateFailure {}

fn load_config(path: &Path, out: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.output_dir = out.to_path_buf();
    Ok(cfg)
}

fn create_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| hybrid_aml::Error::io(out, e))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let cfg = load_config(&config, &out)?;
            let mut gen = cfg.generator.clone();
            if let Some(seed) = seed {
                gen = cfg.generator_for_seed(seed);
            }
            gen.validate()?;
            let ds = generate(&gen)?;
            write_dataset(&ds.accounts, &ds.transactions, &out)?;
            println!(
                "wrote {} accounts and {} transactions (BAD fraction {:.4}) to {}",
                ds.accounts.len(),
                ds.transactions.len(),
                ds.bad_fraction(),
                out.display()
            );
        }
        Command::Train {
            config,
            mode,
            seed,
            out,
        } => {
            let cfg = load_config(&config, &out)?;
            create_out_dir(&out)?;
            let run = harness::run_single(&cfg, mode.into(), seed)?;
            write_dataset(&run.dataset.accounts, &run.dataset.transactions, &out)?;
            run.checkpoint.save(&out.join("model.json"))?;
            write_json(&out.join("graph.json"), &run.graph.summary())?;
            let m = &run.report.metrics;
            println!(
                "{} seed {}: test accuracy {:.4}, f1 {:.4}, auc {:.4} (best epoch {})",
                run.report.mode,
                seed,
                m.accuracy,
                m.f1,
                m.auc,
                run.report.training.best_epoch
            );
        }
        Command::Evaluate {
            model,
            data,
            out,
            split,
        } => {
            let checkpoint = Checkpoint::load(&model)?;
            let dataset = read_dataset(&data)?;
            let metrics = harness::evaluate_checkpoint(&checkpoint, &dataset, &split)?;
            let mode = checkpoint
                .graph
                .as_ref()
                .map(|g| g.layout.mode)
                .context("checkpoint carries no graph layout")?;
            let report = EvaluationReport::new(mode, checkpoint.seed, &split, metrics);
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_out_dir(parent)?;
            }
            write_json(&out, &report)?;
            println!(
                "{split}: accuracy {:.4}, f1 {:.4}, auc {:.4}",
                report.metrics.accuracy, report.metrics.f1, report.metrics.auc
            );
        }
        Command::Compare {
            config,
            out,
            assert_delta,
        } => {
            let cfg = load_config(&config, &out)?;
            create_out_dir(&out)?;
            let report = harness::run_compare(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", emit_table(&report));
            if let Some(x) = assert_delta {
                let delta = report.deltas.auc;
                if delta.is_nan() || delta < x {
                    bail!(GateFailure(format!(
                        "AUC delta {delta:+.4} is below the asserted {x:+.4}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<GateFailure>() {
        return EXIT_GATE;
    }
    match err.downcast_ref::<hybrid_aml::Error>().map(|e| e.class()) {
        Some(ErrorClass::Config) => EXIT_CONFIG,
        Some(ErrorClass::Data) => EXIT_DATA,
        Some(ErrorClass::Training) => EXIT_TRAINING,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
