//! Text tables and CSV exports rendered from a results directory.
//!
//! Rendering depends only on the `result.json` files found, read in sorted
//! path order, so the same directory always yields the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use maxsep_core::eval::OodMetrics;
use maxsep_core::nn::HeadKind;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::protocol::{Protocol, RunResult};
use crate::store;

/// Baseline and treatment heads for deltas and the per-class export.
pub const BASELINE: HeadKind = HeadKind::StandardLinear;
pub const TREATMENT: HeadKind = HeadKind::MaxSepFixed;

pub fn load_results(dir: &Path) -> Result<Vec<RunResult>> {
    if !dir.is_dir() {
        return Err(CliError::EmptyResults(dir.to_path_buf()));
    }
    let paths = store::find_results(dir)?;
    if paths.is_empty() {
        return Err(CliError::EmptyResults(dir.to_path_buf()));
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Result {
                path: p.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

pub struct Report {
    pub text: String,
    /// `(file name, contents)` for each per-class export.
    pub csv_files: Vec<(String, String)>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{:.2}", 100.0 * v))
}

fn signed_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{:+.2}", 100.0 * v))
}

/// Aligned table: numeric columns right-justified, text columns left.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let ncols = header.len();
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    let mut numeric = vec![true; ncols];
    numeric[0] = false;
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(ncols) {
            widths[i] = widths[i].max(cell.len());
            numeric[i] &= cell == "-" || cell.parse::<f64>().is_ok();
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate().take(ncols) {
            let sep = if i == 0 { "" } else { "  " };
            if numeric[i] {
                let _ = write!(line, "{sep}{cell:>w$}", w = widths[i]);
            } else {
                let _ = write!(line, "{sep}{cell:<w$}", w = widths[i]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Distinct factors, largest first.
fn factors_of(runs: &[&RunResult]) -> Vec<f64> {
    let mut f: Vec<f64> = runs.iter().map(|r| r.imbalance_factor).collect();
    f.sort_by(|a, b| b.total_cmp(a));
    f.dedup();
    f
}

fn heads_of(runs: &[&RunResult]) -> Vec<HeadKind> {
    runs.iter()
        .map(|r| r.head)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn seeds_of(runs: &[&RunResult]) -> usize {
    runs.iter().map(|r| r.seed).collect::<BTreeSet<_>>().len()
}

fn select<'a>(runs: &[&'a RunResult], head: HeadKind, factor: f64) -> Vec<&'a RunResult> {
    runs.iter()
        .copied()
        .filter(|r| r.head == head && r.imbalance_factor == factor)
        .collect()
}

/// Mean test accuracy over seeds for each (head, factor).
pub fn mean_accuracy(results: &[RunResult], head: HeadKind, factor: f64) -> Option<f64> {
    mean(
        results
            .iter()
            .filter(|r| {
                r.protocol == Protocol::Classification
                    && r.head == head
                    && r.imbalance_factor == factor
            })
            .map(|r| r.test_accuracy),
    )
}

fn classification_section(hash: &str, runs: &[&RunResult], csv: &mut Vec<(String, String)>) -> String {
    let factors = factors_of(runs);
    let heads = heads_of(runs);
    let mut out = format!(
        "== experiment {} : classification ({} seeds) ==\n\n",
        &hash[..12],
        seeds_of(runs)
    );
    let mut header = vec!["test accuracy (%)".to_string()];
    header.extend(factors.iter().map(|f| format!("f={f}")));
    let acc = |h: HeadKind, f: f64| mean(select(runs, h, f).iter().map(|r| r.test_accuracy));
    let mut rows: Vec<Vec<String>> = heads
        .iter()
        .map(|&h| {
            std::iter::once(h.to_string())
                .chain(factors.iter().map(|&f| pct(acc(h, f))))
                .collect()
        })
        .collect();
    if heads.contains(&BASELINE) && heads.len() > 1 {
        rows.push(vec![format!("delta vs {BASELINE}")]);
        for &h in heads.iter().filter(|&&h| h != BASELINE) {
            let mut row = vec![format!("  {h}")];
            for &f in &factors {
                let d = acc(h, f).zip(acc(BASELINE, f)).map(|(a, b)| a - b);
                row.push(signed_pct(d));
            }
            rows.push(row);
        }
    }
    out.push_str(&table(&header, &rows));

    let mut header = vec!["angular fisher score".to_string()];
    header.extend(factors.iter().map(|f| format!("f={f}")));
    let rows: Vec<Vec<String>> = heads
        .iter()
        .map(|&h| {
            std::iter::once(h.to_string())
                .chain(factors.iter().map(|&f| {
                    mean(select(runs, h, f).iter().filter_map(|r| r.angular_fisher_score))
                        .map_or_else(|| "-".into(), |v| format!("{v:.4}"))
                }))
                .collect()
        })
        .collect();
    out.push('\n');
    out.push_str(&table(&header, &rows));

    if heads.contains(&BASELINE) && heads.contains(&TREATMENT) {
        for &f in &factors {
            let base = select(runs, BASELINE, f);
            let treat = select(runs, TREATMENT, f);
            if base.is_empty() || treat.is_empty() {
                continue;
            }
            let c = treat[0].num_classes;
            let class_mean = |rs: &[&RunResult], k: usize| {
                mean(rs.iter().filter_map(|r| r.per_class_accuracy.get(k).copied().flatten()))
            };
            let mut text = String::from("class,train_count,acc_base,acc_maxsep,delta\n");
            let mut rows = Vec::new();
            for k in 0..c {
                let b = class_mean(&base, k);
                let t = class_mean(&treat, k);
                let d = t.zip(b).map(|(t, b)| t - b);
                let cell = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
                let count = treat[0].train_counts.get(k).copied().unwrap_or(0);
                let _ = writeln!(text, "{k},{count},{},{},{}", cell(b), cell(t), cell(d));
                rows.push(vec![k.to_string(), count.to_string(), pct(b), pct(t), signed_pct(d)]);
            }
            let name = format!("per_class_{}_f{f}.csv", &hash[..12]);
            let _ = write!(out, "\nper-class accuracy (%) at f={f}, {TREATMENT} vs {BASELINE} ({name})\n");
            let header: Vec<String> = ["class", "train_count", "base", "maxsep", "delta"]
                .map(String::from)
                .to_vec();
            out.push_str(&table(&header, &rows));
            csv.push((name, text));
        }
    }
    out
}

/// Mean metrics over seeds for one (head, OOD set, score).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OodSummaryRow {
    pub head: HeadKind,
    pub ood_set: String,
    pub score_fn: String,
    pub seeds: usize,
    pub mean: OodMetrics,
}

fn mean_metrics(ms: &[OodMetrics]) -> OodMetrics {
    OodMetrics {
        fpr95: mean(ms.iter().map(|m| m.fpr95)).unwrap_or(f64::NAN),
        auroc: mean(ms.iter().map(|m| m.auroc)).unwrap_or(f64::NAN),
        aupr: mean(ms.iter().map(|m| m.aupr)).unwrap_or(f64::NAN),
    }
}

pub fn summarize_ood<'a>(runs: impl IntoIterator<Item = &'a RunResult>) -> Vec<OodSummaryRow> {
    let mut groups: BTreeMap<(String, String, HeadKind), Vec<OodMetrics>> = BTreeMap::new();
    for r in runs {
        for rec in r.ood.iter().flatten() {
            groups
                .entry((rec.ood_set.clone(), rec.score_fn.clone(), r.head))
                .or_default()
                .push(rec.metrics);
        }
    }
    groups
        .into_iter()
        .map(|((ood_set, score_fn, head), ms)| OodSummaryRow {
            head,
            ood_set,
            score_fn,
            seeds: ms.len(),
            mean: mean_metrics(&ms),
        })
        .collect()
}

fn ood_section(hash: &str, runs: &[&RunResult]) -> String {
    let mut out = format!(
        "== experiment {} : out-of-distribution ({} seeds) ==\n\n",
        &hash[..12],
        seeds_of(runs)
    );
    let header: Vec<String> = ["ood set", "score", "head", "FPR95", "AUROC", "AUPR"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = summarize_ood(runs.iter().copied())
        .into_iter()
        .map(|s| {
            vec![
                s.ood_set,
                s.score_fn,
                s.head.to_string(),
                pct(Some(s.mean.fpr95)),
                pct(Some(s.mean.auroc)),
                pct(Some(s.mean.aupr)),
            ]
        })
        .collect();
    out.push_str(&table(&header, &rows));
    out
}

/// Mean open-set metrics over seeds for one head.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OsrSummaryRow {
    pub head: HeadKind,
    pub seeds: usize,
    pub closed_set_accuracy: f64,
    pub msp: OodMetrics,
    pub mls: OodMetrics,
}

pub fn summarize_osr<'a>(runs: impl IntoIterator<Item = &'a RunResult>) -> Vec<OsrSummaryRow> {
    let mut groups: BTreeMap<HeadKind, Vec<&RunResult>> = BTreeMap::new();
    for r in runs {
        if r.osr.is_some() {
            groups.entry(r.head).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .map(|(head, rs)| {
            let blocks: Vec<_> = rs.iter().filter_map(|r| r.osr.as_ref()).collect();
            OsrSummaryRow {
                head,
                seeds: rs.len(),
                closed_set_accuracy: mean(rs.iter().map(|r| r.test_accuracy)).unwrap_or(f64::NAN),
                msp: mean_metrics(&blocks.iter().map(|b| b.msp).collect::<Vec<_>>()),
                mls: mean_metrics(&blocks.iter().map(|b| b.mls).collect::<Vec<_>>()),
            }
        })
        .collect()
}

fn osr_section(hash: &str, runs: &[&RunResult]) -> String {
    let known = runs
        .iter()
        .find_map(|r| r.osr.as_ref())
        .map(|o| format!("{:?}", o.known_classes))
        .unwrap_or_default();
    let mut out = format!(
        "== experiment {} : open-set, known classes {known} ({} seeds) ==\n\n",
        &hash[..12],
        seeds_of(runs)
    );
    let header: Vec<String> = ["head", "closed acc", "MSP AUROC", "MLS AUROC", "MLS FPR95"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = summarize_osr(runs.iter().copied())
        .into_iter()
        .map(|s| {
            vec![
                s.head.to_string(),
                pct(Some(s.closed_set_accuracy)),
                pct(Some(s.msp.auroc)),
                pct(Some(s.mls.auroc)),
                pct(Some(s.mls.fpr95)),
            ]
        })
        .collect();
    out.push_str(&table(&header, &rows));
    out
}

pub fn render(results: &[RunResult]) -> Report {
    let mut groups: BTreeMap<(&str, Protocol), Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        groups
            .entry((r.experiment_hash.as_str(), r.protocol))
            .or_default()
            .push(r);
    }
    let mut text = String::new();
    let mut csv_files = Vec::new();
    for ((hash, protocol), runs) in groups {
        if !text.is_empty() {
            text.push('\n');
        }
        let section = match protocol {
            Protocol::Classification => classification_section(hash, &runs, &mut csv_files),
            Protocol::Ood => ood_section(hash, &runs),
            Protocol::Osr => osr_section(hash, &runs),
        };
        text.push_str(&section);
    }
    Report { text, csv_files }
}
