//! The CLI verbs as library functions. Each returns data for `main` to
//! print; files are written here.

use std::path::{Path, PathBuf};
use std::time::Instant;

use maxsep_core::nn::HeadKind;
use maxsep_core::separation::{matrix_to_csv, verify_separation_with, VerifyOptions};
use maxsep_core::{build_separation_matrix, VerificationReport};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::protocol::{self, ModelSource, RunOutput, RunResult};
use crate::report::{self, OodSummaryRow, OsrSummaryRow, Report};
use crate::store::{self, MODEL_STEM};

pub struct MatrixOutcome {
    pub csv: String,
    pub report: VerificationReport,
}

/// Build and verify the separation matrix for `classes`; write it to `out`
/// only if verification passes.
pub fn cmd_matrix(classes: usize, out: Option<&Path>, tolerance: f64, seed: u64) -> Result<MatrixOutcome> {
    let p = build_separation_matrix(classes)?;
    let opts = VerifyOptions {
        seed,
        ..VerifyOptions::default()
    };
    let report = verify_separation_with(&p, tolerance, &opts);
    let csv = matrix_to_csv(&p);
    if report.passed {
        if let Some(path) = out {
            store::write_atomic(path, &csv)?;
        }
    }
    Ok(MatrixOutcome { csv, report })
}

/// Load a config and optionally narrow it to a single seed.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn run_jobs<T, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<RunResult>>
where
    T: Sync,
    F: Fn(&T) -> Result<RunResult> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().map(&f).collect())
}

fn finish(cfg: &ExperimentConfig, out: RunOutput, started: Instant) -> Result<RunResult> {
    let path = protocol::persist(&cfg.output_dir, &out, started)?;
    let r = out.result;
    eprintln!(
        "seed {} {:<22} f={:<6} acc {:.4}  -> {}",
        r.seed,
        r.head.as_str(),
        r.imbalance_factor,
        r.test_accuracy,
        path.display()
    );
    Ok(r)
}

/// One classification run per (seed, imbalance factor, head).
pub fn cmd_train(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<RunResult>> {
    let mut items = Vec::new();
    for &seed in &cfg.seeds {
        for &factor in &cfg.imbalance_factors {
            for &head in &cfg.heads {
                items.push((seed, factor, head));
            }
        }
    }
    run_jobs(jobs, &items, |&(seed, factor, head)| {
        let started = Instant::now();
        let data = protocol::prepare_data(cfg, seed)?;
        let out = protocol::run_classification(cfg, &data, factor, seed, head)?;
        finish(cfg, out, started)
    })
}

fn seed_head_pairs(cfg: &ExperimentConfig) -> Vec<(u64, HeadKind)> {
    cfg.seeds
        .iter()
        .flat_map(|&s| cfg.heads.iter().map(move |&h| (s, h)))
        .collect()
}

pub struct OodOutcome {
    pub results: Vec<RunResult>,
    pub summary: Vec<OodSummaryRow>,
    pub summary_path: PathBuf,
}

/// OOD scoring for every (seed, head); writes a mean-over-seeds summary
/// next to the per-seed directories.
pub fn cmd_eval_ood(cfg: &ExperimentConfig, jobs: usize, inject_separated: bool) -> Result<OodOutcome> {
    let spec = cfg
        .ood
        .as_ref()
        .ok_or_else(|| CliError::config("", "eval-ood needs an 'ood' section"))?;
    let checkpoint_hash = cfg.run_hash(1.0);
    let results = run_jobs(jobs, &seed_head_pairs(cfg), |&(seed, head)| {
        let started = Instant::now();
        let data = protocol::prepare_data(cfg, seed)?;
        let stem = store::run_dir(&cfg.output_dir, &checkpoint_hash, seed, head).join(MODEL_STEM);
        let source = if spec.train {
            ModelSource::Train
        } else {
            ModelSource::Checkpoint(&stem)
        };
        let out = protocol::run_ood(cfg, &data, seed, head, source, inject_separated)?;
        finish(cfg, out, started)
    })?;
    let summary = report::summarize_ood(&results);
    let summary_path = cfg.output_dir.join(cfg.protocol_hash("ood")).join("ood_summary.json");
    store::write_json(&summary_path, &summary)?;
    Ok(OodOutcome {
        results,
        summary,
        summary_path,
    })
}

pub struct OsrOutcome {
    pub results: Vec<RunResult>,
    pub summary: Vec<OsrSummaryRow>,
    pub summary_path: PathBuf,
}

pub fn cmd_eval_osr(cfg: &ExperimentConfig, jobs: usize) -> Result<OsrOutcome> {
    if cfg.osr.is_none() {
        return Err(CliError::config("", "eval-osr needs an 'osr' section"));
    }
    let results = run_jobs(jobs, &seed_head_pairs(cfg), |&(seed, head)| {
        let started = Instant::now();
        let data = protocol::prepare_data(cfg, seed)?;
        let out = protocol::run_osr(cfg, &data, seed, head)?;
        finish(cfg, out, started)
    })?;
    let summary = report::summarize_osr(&results);
    let summary_path = cfg.output_dir.join(cfg.protocol_hash("osr")).join("osr_summary.json");
    store::write_json(&summary_path, &summary)?;
    Ok(OsrOutcome {
        results,
        summary,
        summary_path,
    })
}

/// Render the report; per-class CSVs go to `csv_dir` when given.
pub fn cmd_report(results_dir: &Path, csv_dir: Option<&Path>) -> Result<Report> {
    let results = report::load_results(results_dir)?;
    let report = report::render(&results);
    if let Some(dir) = csv_dir {
        for (name, contents) in &report.csv_files {
            store::write_atomic(&dir.join(name), contents)?;
        }
    }
    Ok(report)
}
