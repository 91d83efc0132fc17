//! One training run per (seed, head, imbalance factor), plus the OOD and
//! open-set evaluations built on top of it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use maxsep_core::data::{
    gen_blobs, gen_ood, load_idx, make_longtail_profile, subsample_longtail, BlobSpec, Dataset,
};
use maxsep_core::eval::{
    accuracy, angular_fisher_score, energy_score, fit_class_stats, mahalanobis_score, mls_score,
    msp_score, ood_metrics, per_class_accuracy, OodMetrics, ScoreSet,
};
use maxsep_core::nn::{
    argmax_rows, load_checkpoint, save_checkpoint, train, Architecture, HeadKind, Network,
    TrainingLog,
};
use maxsep_core::rng::{derive_seed_str, rng_for};
use maxsep_core::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSpec, ExperimentConfig, OodSetSpec};
use crate::error::{CliError, Result};
use crate::store::{self, LOG_FILE, MODEL_STEM, RESULT_FILE, SCORES_FILE, TIMING_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Classification,
    Ood,
    Osr,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Classification => "classification",
            Protocol::Ood => "ood",
            Protocol::Osr => "osr",
        }
    }
}

/// Everything persisted in `result.json`. Wall-clock time goes to a
/// separate `timing.json` so this file is reproducible bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunResult {
    pub protocol: Protocol,
    /// Hash of this run's directory.
    pub config_hash: String,
    /// Hash of the whole config; groups runs in reports.
    pub experiment_hash: String,
    pub seed: u64,
    pub head: HeadKind,
    pub imbalance_factor: f64,
    pub num_classes: usize,
    pub train_counts: Vec<usize>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// `null` for classes absent from the test set.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// `null` when the score is undefined (e.g. zero between-class spread).
    pub angular_fisher_score: Option<f64>,
    pub final_loss: Option<f64>,
    pub log: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood: Option<Vec<OodRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osr: Option<OsrRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodRecord {
    pub ood_set: String,
    pub score_fn: String,
    pub metrics: OodMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OsrRecord {
    pub known_classes: Vec<usize>,
    pub open_samples: usize,
    pub msp: OodMetrics,
    pub mls: OodMetrics,
}

#[derive(Debug, Clone, Serialize)]
struct Timing {
    wall_clock_seconds: f64,
}

/// Balanced training pool and test set for one seed.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train_pool: Dataset,
    pub test: Dataset,
}

pub fn prepare_data(cfg: &ExperimentConfig, seed: u64) -> Result<PreparedData> {
    match &cfg.dataset {
        DatasetSpec::Blobs {
            num_classes,
            dim,
            train_per_class,
            test_per_class,
            mean_scale,
            noise_std,
        } => {
            let all = gen_blobs(&BlobSpec {
                num_classes: *num_classes,
                dim: *dim,
                samples_per_class: train_per_class + test_per_class,
                mean_scale: *mean_scale,
                noise_std: *noise_std,
                seed: derive_seed_str(seed, "data"),
            })?;
            let (train_pool, test) = all.split_per_class(*train_per_class)?;
            Ok(PreparedData { train_pool, test })
        }
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train_pool = load_idx(train_images, train_labels)?;
            let test = load_idx(test_images, test_labels)?;
            let c = train_pool.num_classes().max(test.num_classes());
            let rewrap = |d: Dataset| Dataset::new(d.features().clone(), d.labels().to_vec(), c);
            Ok(PreparedData {
                train_pool: rewrap(train_pool)?,
                test: rewrap(test)?,
            })
        }
    }
}

/// Network for `head`, seeded identically for every head at a given seed.
pub fn build_network(
    cfg: &ExperimentConfig,
    head: HeadKind,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<Network> {
    let mut arch = Architecture::simplex(input_dim, cfg.network.hidden.clone(), num_classes);
    if !head.needs_simplex_dim() {
        if let Some(d) = cfg.network.feature_dim {
            arch.feature_dim = d;
        }
    }
    Ok(Network::new(arch, head, cfg.rho, &mut rng_for(seed, "init"))?)
}

/// Accuracy, per-class accuracy, AFS on the penultimate features.
struct Evaluation {
    test_accuracy: f64,
    per_class: Vec<Option<f64>>,
    afs: Option<f64>,
    features: DMatrix<f64>,
    logits: DMatrix<f64>,
}

fn evaluate(net: &Network, test: &Dataset) -> Result<Evaluation> {
    let (features, logits) = net.infer(test.features())?;
    let pred = argmax_rows(&logits);
    let c = test.num_classes();
    Ok(Evaluation {
        test_accuracy: accuracy(&pred, test.labels())?,
        per_class: per_class_accuracy(&pred, test.labels(), c)?,
        afs: angular_fisher_score(&features, test.labels(), c).ok(),
        features,
        logits,
    })
}

fn train_accuracy(net: &Network, train_set: &Dataset) -> Result<f64> {
    Ok(accuracy(&net.predict(train_set.features())?, train_set.labels())?)
}

fn fit(
    cfg: &ExperimentConfig,
    net: &mut Network,
    train_set: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<TrainingLog> {
    Ok(train(
        net,
        train_set,
        Some(test),
        &cfg.optimizer,
        cfg.epochs,
        cfg.batch_size,
        derive_seed_str(seed, "train"),
    )?)
}

/// In-memory outcome of one run, before anything is written.
pub struct RunOutput {
    pub result: RunResult,
    pub log: TrainingLog,
    pub network: Network,
    /// Extra CSV written next to the result (OOD / open-set scores).
    pub scores_csv: Option<String>,
}

/// Long-tailed classification at one imbalance factor.
pub fn run_classification(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    factor: f64,
    seed: u64,
    head: HeadKind,
) -> Result<RunOutput> {
    let pool = &data.train_pool;
    let c = pool.num_classes();
    let n_max = pool.class_counts().into_iter().min().unwrap_or(0);
    let profile = make_longtail_profile(c, n_max, factor)?;
    let train_set = subsample_longtail(pool, &profile, derive_seed_str(seed, "subsample"))?;
    let mut net = build_network(cfg, head, pool.dim(), c, seed)?;
    let log = fit(cfg, &mut net, &train_set, &data.test, seed)?;
    let ev = evaluate(&net, &data.test)?;
    let result = RunResult {
        protocol: Protocol::Classification,
        config_hash: cfg.run_hash(factor),
        experiment_hash: cfg.hash(),
        seed,
        head,
        imbalance_factor: factor,
        num_classes: c,
        train_counts: train_set.class_counts(),
        train_accuracy: train_accuracy(&net, &train_set)?,
        test_accuracy: ev.test_accuracy,
        per_class_accuracy: ev.per_class,
        angular_fisher_score: ev.afs,
        final_loss: log.last().map(|r| r.loss),
        log: LOG_FILE.into(),
        ood: None,
        osr: None,
    };
    Ok(RunOutput {
        result,
        log,
        network: net,
        scores_csv: None,
    })
}

/// Where OOD evaluation gets its model from.
pub enum ModelSource<'a> {
    /// Train on the balanced pool.
    Train,
    /// Load the checkpoint left by `train` at imbalance factor 1.0.
    Checkpoint(&'a Path),
}

/// Score functions evaluated against every OOD set.
pub const OOD_SCORES: [&str; 3] = ["msp", "energy", "mahalanobis"];

/// Train (or load) on balanced data, then score the test set against each
/// configured OOD set. `inject_separated` adds a synthetic, perfectly
/// separated score set as a plumbing check.
pub fn run_ood(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    seed: u64,
    head: HeadKind,
    source: ModelSource<'_>,
    inject_separated: bool,
) -> Result<RunOutput> {
    let spec = cfg
        .ood
        .as_ref()
        .ok_or_else(|| CliError::config("", "missing 'ood' section"))?;
    let pool = &data.train_pool;
    let c = pool.num_classes();
    let (net, log) = match source {
        ModelSource::Train => {
            let mut net = build_network(cfg, head, pool.dim(), c, seed)?;
            let log = fit(cfg, &mut net, pool, &data.test, seed)?;
            (net, log)
        }
        ModelSource::Checkpoint(stem) => {
            if !stem.with_extension("json").exists() {
                return Err(CliError::config(
                    stem,
                    "missing model checkpoint; run `maxsep train` first or enable ood.train",
                ));
            }
            let net = load_checkpoint(stem)?;
            if net.head_kind() != head || net.architecture().input_dim != pool.dim() {
                return Err(CliError::config(stem, "checkpoint does not match the config"));
            }
            (net, TrainingLog::default())
        }
    };
    let ev = evaluate(&net, &data.test)?;
    let (train_features, _) = net.infer(pool.features())?;
    let stats = fit_class_stats(&train_features, pool.labels(), c, spec.mahalanobis_epsilon)?;

    let score_all = |features: &DMatrix<f64>, logits: &DMatrix<f64>| -> Result<[Vec<f64>; 3]> {
        Ok([
            msp_score(logits),
            energy_score(logits, spec.temperature)?,
            mahalanobis_score(&stats, features)?,
        ])
    };
    let in_scores = score_all(&ev.features, &ev.logits)?;
    let mut csv = String::from("split,ood_set,score_fn,score,label\n");
    let mut push_rows = |split: &str, set: &str, score_fn: &str, scores: &[f64], label: u8| {
        for s in scores {
            csv.push_str(&format!("{split},{set},{score_fn},{s},{label}\n"));
        }
    };
    for (name, s) in OOD_SCORES.iter().zip(&in_scores) {
        push_rows("in", "", name, s, 1);
    }

    let mut records = Vec::new();
    for OodSetSpec { name, n, generator } in &spec.sets {
        let set = gen_ood(generator, pool, *n, derive_seed_str(seed, &format!("ood:{name}")))?;
        let (features, logits) = net.infer(set.features())?;
        let out_scores = score_all(&features, &logits)?;
        for ((score_fn, ins), outs) in OOD_SCORES.iter().zip(&in_scores).zip(&out_scores) {
            push_rows("out", name, score_fn, outs, 0);
            records.push(OodRecord {
                ood_set: name.clone(),
                score_fn: (*score_fn).into(),
                metrics: ood_metrics(&ScoreSet::new(ins.clone(), outs.clone()))?,
            });
        }
    }
    if inject_separated {
        let separated = ScoreSet::new(vec![1.0; 8], vec![0.0; 8]);
        records.push(OodRecord {
            ood_set: "debug".into(),
            score_fn: "separated".into(),
            metrics: ood_metrics(&separated)?,
        });
    }

    let result = RunResult {
        protocol: Protocol::Ood,
        config_hash: cfg.protocol_hash("ood"),
        experiment_hash: cfg.hash(),
        seed,
        head,
        imbalance_factor: 1.0,
        num_classes: c,
        train_counts: pool.class_counts(),
        train_accuracy: train_accuracy(&net, pool)?,
        test_accuracy: ev.test_accuracy,
        per_class_accuracy: ev.per_class,
        angular_fisher_score: ev.afs,
        final_loss: log.last().map(|r| r.loss),
        log: LOG_FILE.into(),
        ood: Some(records),
        osr: None,
    };
    Ok(RunOutput {
        result,
        log,
        network: net,
        scores_csv: Some(csv),
    })
}

/// Train on the known classes only; the remaining classes' test samples
/// form the open set.
pub fn run_osr(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    seed: u64,
    head: HeadKind,
) -> Result<RunOutput> {
    let known = &cfg
        .osr
        .as_ref()
        .ok_or_else(|| CliError::config("", "missing 'osr' section"))?
        .known_classes;
    let c_all = data.train_pool.num_classes();
    if known.len() >= c_all || known.iter().any(|&k| k >= c_all) {
        return Err(CliError::config(
            "",
            format!("osr.known_classes must be a proper subset of 0..{c_all}"),
        ));
    }
    let train_set = data.train_pool.restrict_classes(known)?;
    let test_known = data.test.restrict_classes(known)?;
    let open_idx: Vec<usize> = (0..data.test.len())
        .filter(|&i| !known.contains(&data.test.labels()[i]))
        .collect();
    let open = data.test.subset(&open_idx);
    if open.is_empty() {
        return Err(CliError::config("", "open set is empty"));
    }

    let c = known.len();
    let mut net = build_network(cfg, head, train_set.dim(), c, seed)?;
    let log = fit(cfg, &mut net, &train_set, &test_known, seed)?;
    let ev = evaluate(&net, &test_known)?;
    let (_, open_logits) = net.infer(open.features())?;

    let msp = ScoreSet::new(msp_score(&ev.logits), msp_score(&open_logits));
    let mls = ScoreSet::new(mls_score(&ev.logits), mls_score(&open_logits));
    let mut csv = String::from("split,score_fn,score,label\n");
    for (name, set) in [("msp", &msp), ("mls", &mls)] {
        for s in &set.in_scores {
            csv.push_str(&format!("known,{name},{s},1\n"));
        }
        for s in &set.out_scores {
            csv.push_str(&format!("open,{name},{s},0\n"));
        }
    }

    let result = RunResult {
        protocol: Protocol::Osr,
        config_hash: cfg.protocol_hash("osr"),
        experiment_hash: cfg.hash(),
        seed,
        head,
        imbalance_factor: 1.0,
        num_classes: c,
        train_counts: train_set.class_counts(),
        train_accuracy: train_accuracy(&net, &train_set)?,
        test_accuracy: ev.test_accuracy,
        per_class_accuracy: ev.per_class,
        angular_fisher_score: ev.afs,
        final_loss: log.last().map(|r| r.loss),
        log: LOG_FILE.into(),
        ood: None,
        osr: Some(OsrRecord {
            known_classes: known.clone(),
            open_samples: open.len(),
            msp: ood_metrics(&msp)?,
            mls: ood_metrics(&mls)?,
        }),
    };
    Ok(RunOutput {
        result,
        log,
        network: net,
        scores_csv: Some(csv),
    })
}

/// Persist a run under its directory; `result.json` is written last so its
/// presence marks a complete run.
pub fn persist(output_dir: &Path, out: &RunOutput, started: Instant) -> Result<PathBuf> {
    let r = &out.result;
    let dir = store::run_dir(output_dir, &r.config_hash, r.seed, r.head);
    store::write_atomic(&dir.join(LOG_FILE), out.log.to_jsonl())?;
    save_checkpoint(&out.network, dir.join(MODEL_STEM))?;
    if let Some(csv) = &out.scores_csv {
        store::write_atomic(&dir.join(SCORES_FILE), csv)?;
    }
    store::write_json(
        &dir.join(TIMING_FILE),
        &Timing {
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    let path = dir.join(RESULT_FILE);
    store::write_json(&path, r)?;
    Ok(path)
}
