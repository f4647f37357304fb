use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use localboost::boost::{prop1_counterexample, Variant};
use localboost::harness::{self, Profile, RunConfig, RunReport};
use localboost::{Error, Result};

#[derive(Parser)]
#[command(
    name = "localboost",
    version,
    about = "Localized boosting over weakly labeled data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config profile.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train/valid/test dataset files.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train one variant and write a run directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Train every variant, one subdirectory each.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Score a saved ensemble on a dataset file.
    Evaluate {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the metrics here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the two-point counterexample.
    Prop1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a run over several seeds and summarize.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Option<String>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
    },
}

fn load_config(common: &Common, variant: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(p) = &common.profile {
        cfg.profile = Some(Profile::parse(p)?);
    }
    if let Some(v) = variant {
        cfg.variant = Variant::parse(v)?;
    }
    cfg.resolve()
}

fn write_or_print<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn summary_line(r: &RunReport) -> String {
    format!(
        "{}: test acc {:.4} macro-F1 {:.4} ({} members, baseline acc {:.4})",
        r.variant.name(),
        r.test.accuracy,
        r.test.macro_f1,
        r.members,
        r.baseline_test.accuracy
    )
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { common } => {
            let cfg = load_config(&common, None)?;
            for p in harness::generate_to_dir(&cfg, &common.out)? {
                println!("{}", p.display());
            }
        }
        Command::Train { common, variant } => {
            let cfg = load_config(&common, variant.as_deref())?;
            let r = harness::run_to_dir(&cfg, &common.out)?;
            println!("{}", summary_line(&r));
        }
        Command::Ablate { common } => {
            let base = load_config(&common, None)?;
            let mut reports = Vec::new();
            for v in Variant::ALL {
                let cfg = RunConfig {
                    variant: v,
                    ..base.clone()
                };
                let r = harness::run_to_dir(&cfg, &common.out.join(v.name()))?;
                println!("{}", summary_line(&r));
                reports.push(r);
            }
            write_or_print(&reports, Some(&common.out.join("ablation.json")))?;
        }
        Command::Evaluate {
            ensemble,
            data,
            out,
        } => {
            let m = harness::evaluate_file(&ensemble, &data)?;
            write_or_print(&m, out.as_deref())?;
        }
        Command::Prop1 { out } => {
            let r = prop1_counterexample();
            eprintln!(
                "min convex loss {:.3}, gated loss {:.3}",
                r.min_convex_loss, r.gated_loss
            );
            write_or_print(&r, out.as_deref())?;
        }
        Command::Sweep {
            common,
            variant,
            seeds,
        } => {
            let cfg = load_config(&common, variant.as_deref())?;
            let s = harness::seed_sweep(&cfg, &seeds, &common.out)?;
            println!(
                "{}: test acc {:.4} +- {:.4} over {} of {} seeds",
                s.variant.name(),
                s.test_accuracy.mean,
                s.test_accuracy.std,
                s.completed.len(),
                s.seeds.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Json(_) => 2,
                Error::Io { .. } => 3,
                _ => 1,
            })
        }
    }
}
