use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confidence scores of in-distribution and out-of-distribution samples.
/// Higher scores mean "more in-distribution".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub in_scores: Vec<f64>,
    pub out_scores: Vec<f64>,
}

impl ScoreSet {
    pub fn new(in_scores: Vec<f64>, out_scores: Vec<f64>) -> Self {
        Self {
            in_scores,
            out_scores,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OodMetrics {
    pub fpr95: f64,
    pub auroc: f64,
    pub aupr: f64,
}

/// One threshold level of the descending sweep: how many in/out samples
/// share the score.
struct Level {
    n_in: usize,
    n_out: usize,
}

fn levels(s: &ScoreSet) -> Result<Vec<Level>> {
    if s.in_scores.is_empty() {
        return Err(Error::EmptyScores("in-distribution"));
    }
    if s.out_scores.is_empty() {
        return Err(Error::EmptyScores("out-of-distribution"));
    }
    if s.in_scores.iter().chain(&s.out_scores).any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    let mut all: Vec<(f64, bool)> = s
        .in_scores
        .iter()
        .map(|&v| (v, true))
        .chain(s.out_scores.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<Level> = Vec::new();
    let mut prev: Option<f64> = None;
    for (v, is_in) in all {
        if prev != Some(v) {
            out.push(Level { n_in: 0, n_out: 0 });
            prev = Some(v);
        }
        let level = out.last_mut().unwrap();
        if is_in {
            level.n_in += 1;
        } else {
            level.n_out += 1;
        }
    }
    Ok(out)
}

/// `P(in > out) + P(in == out) / 2`.
pub fn auroc(s: &ScoreSet) -> Result<f64> {
    Ok(ood_metrics(s)?.auroc)
}

/// FPR at 95% TPR, AUROC and average precision (in-distribution positive).
///
/// A sample is accepted as in-distribution when its score is at least the
/// threshold. FPR95 is read at the highest threshold whose TPR reaches 0.95;
/// AUPR sums `(R_t - R_{t-1}) * P_t` over descending distinct thresholds.
pub fn ood_metrics(s: &ScoreSet) -> Result<OodMetrics> {
    let levels = levels(s)?;
    let n_in = s.in_scores.len();
    let n_out = s.out_scores.len();

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut wins = 0.0f64;
    let mut ap = 0.0f64;
    let mut prev_recall = 0.0f64;
    let mut fpr95 = None;
    for level in &levels {
        let lower_out = n_out - fp - level.n_out;
        wins += level.n_in as f64 * lower_out as f64 + 0.5 * (level.n_in * level.n_out) as f64;
        tp += level.n_in;
        fp += level.n_out;
        let recall = tp as f64 / n_in as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        if fpr95.is_none() && tp * 100 >= 95 * n_in {
            fpr95 = Some(fp as f64 / n_out as f64);
        }
    }
    Ok(OodMetrics {
        fpr95: fpr95.expect("tpr reaches 1 at the lowest threshold"),
        auroc: wins / (n_in as f64 * n_out as f64),
        aupr: ap,
    })
}
