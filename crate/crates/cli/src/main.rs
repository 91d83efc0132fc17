use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use maxsep_cli::commands;

#[derive(Parser)]
#[command(name = "maxsep", version, about = "Maximally separated class vectors: build, train, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and verify the separation matrix, write it as CSV.
    Matrix {
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        classes: u64,
        /// Output CSV; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        /// Seed for pair sampling above 2000 classes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Long-tailed classification runs for every seed, factor and head.
    Train(RunArgs),
    /// Out-of-distribution scoring (msp, energy, mahalanobis).
    EvalOod {
        #[command(flatten)]
        run: RunArgs,
        /// Add a synthetic, perfectly separated score set to every run.
        #[arg(long)]
        inject_separated_scores: bool,
    },
    /// Open-set recognition on the configured known-class split.
    EvalOsr(RunArgs),
    /// Print comparison tables for a results directory.
    Report {
        results_dir: PathBuf,
        /// Directory for the per-class CSV exports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run only this seed instead of the config's list.
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Matrix {
            classes,
            out,
            tolerance,
            seed,
        } => {
            let classes = usize::try_from(classes).context("class count too large")?;
            let outcome = commands::cmd_matrix(classes, out.as_deref(), tolerance, seed)?;
            let report = serde_json::to_string_pretty(&outcome.report)?;
            match &out {
                Some(path) => {
                    println!("{report}");
                    if outcome.report.passed {
                        eprintln!("wrote {}", path.display());
                    }
                }
                None => {
                    print!("{}", outcome.csv);
                    eprintln!("{report}");
                }
            }
            if !outcome.report.passed {
                eprintln!("error: verification failed at tolerance {tolerance}");
            }
            Ok(outcome.report.passed)
        }
        Command::Train(args) => {
            let cfg = commands::load_config(&args.config, args.seed)?;
            let results = commands::cmd_train(&cfg, args.jobs)?;
            println!("{} runs written under {}", results.len(), cfg.output_dir.display());
            Ok(true)
        }
        Command::EvalOod {
            run,
            inject_separated_scores,
        } => {
            let cfg = commands::load_config(&run.config, run.seed)?;
            let outcome = commands::cmd_eval_ood(&cfg, run.jobs, inject_separated_scores)?;
            println!("{:<16} {:<12} {:<24} {:>8} {:>8} {:>8}", "ood set", "score", "head", "FPR95", "AUROC", "AUPR");
            for row in &outcome.summary {
                println!(
                    "{:<16} {:<12} {:<24} {:>8.2} {:>8.2} {:>8.2}",
                    row.ood_set,
                    row.score_fn,
                    row.head.as_str(),
                    100.0 * row.mean.fpr95,
                    100.0 * row.mean.auroc,
                    100.0 * row.mean.aupr
                );
            }
            println!("summary: {}", outcome.summary_path.display());
            Ok(true)
        }
        Command::EvalOsr(args) => {
            let cfg = commands::load_config(&args.config, args.seed)?;
            let outcome = commands::cmd_eval_osr(&cfg, args.jobs)?;
            println!("{:<24} {:>10} {:>10}", "head", "MSP AUROC", "MLS AUROC");
            for row in &outcome.summary {
                println!(
                    "{:<24} {:>10.2} {:>10.2}",
                    row.head.as_str(),
                    100.0 * row.msp.auroc,
                    100.0 * row.mls.auroc
                );
            }
            println!("summary: {}", outcome.summary_path.display());
            Ok(true)
        }
        Command::Report { results_dir, out } => {
            let report = commands::cmd_report(&results_dir, out.as_deref())?;
            print!("{}", report.text);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
