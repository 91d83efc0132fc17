//! Reference implementations used as independent oracles. Each one is the
//! most direct formulation available (loops, brute force, naive formulas) and
//! shares no code path with the crate under test.

#![allow(dead_code, clippy::needless_range_loop)]

use maxsep_core::DMatrix;

/// Central finite difference of `f` at `x` along every coordinate.
pub fn central_difference<F>(x: &[f64], step: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let up = f(&p);
            p[i] = orig - step;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, floor)`, maximized over entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Softmax cross-entropy straight from the definition.
pub fn naive_cross_entropy(logits: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let n = logits.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let max = (0..logits.ncols()).map(|j| logits[(i, j)]).fold(f64::MIN, f64::max);
        let z: f64 = (0..logits.ncols()).map(|j| (logits[(i, j)] - max).exp()).sum();
        total += -((logits[(i, labels[i])] - max).exp() / z).ln();
    }
    total / n as f64
}

/// O(n^2) pairwise AUROC.
pub fn pairwise_auroc(ins: &[f64], outs: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &a in ins {
        for &b in outs {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (ins.len() as f64 * outs.len() as f64)
}

/// Exhaustive threshold sweep: returns `(fpr95, aupr)` by recounting every
/// sample at every distinct threshold.
pub fn threshold_sweep(ins: &[f64], outs: &[f64]) -> (f64, f64) {
    let mut thresholds: Vec<f64> = ins.iter().chain(outs).copied().collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut fpr95 = None;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let tp = ins.iter().filter(|&&v| v >= t).count();
        let fp = outs.iter().filter(|&&v| v >= t).count();
        let recall = tp as f64 / ins.len() as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        // TPR >= 0.95, compared exactly in integers
        if fpr95.is_none() && tp * 100 >= 95 * ins.len() {
            fpr95 = Some(fp as f64 / outs.len() as f64);
        }
    }
    (fpr95.unwrap(), ap)
}

pub fn naive_msp(logits: &DMatrix<f64>) -> Vec<f64> {
    (0..logits.nrows())
        .map(|i| {
            let row: Vec<f64> = (0..logits.ncols()).map(|j| logits[(i, j)]).collect();
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            row.iter().map(|v| v.exp() / z).fold(f64::MIN, f64::max)
        })
        .collect()
}

pub fn naive_energy(logits: &DMatrix<f64>, t: f64) -> Vec<f64> {
    (0..logits.nrows())
        .map(|i| t * (0..logits.ncols()).map(|j| (logits[(i, j)] / t).exp()).sum::<f64>().ln())
        .collect()
}

pub fn naive_mls(logits: &DMatrix<f64>) -> Vec<f64> {
    (0..logits.nrows())
        .map(|i| (0..logits.ncols()).map(|j| logits[(i, j)]).fold(f64::MIN, f64::max))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| x[(i, j)]).collect())
        .collect()
}

fn class_means(x: &[Vec<f64>], labels: &[usize], c: usize) -> Vec<Vec<f64>> {
    let d = x[0].len();
    (0..c)
        .map(|k| {
            let members: Vec<&Vec<f64>> =
                x.iter().zip(labels).filter(|(_, &y)| y == k).map(|(r, _)| r).collect();
            (0..d)
                .map(|j| members.iter().map(|r| r[j]).sum::<f64>() / members.len() as f64)
                .collect()
        })
        .collect()
}

/// Angular Fisher score with explicit double loops.
pub fn two_loop_afs(x: &DMatrix<f64>, labels: &[usize], c: usize) -> f64 {
    let x = rows(x);
    let d = x[0].len();
    let means = class_means(&x, labels, c);
    let global: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / x.len() as f64).collect();
    let mut sw = 0.0;
    let mut sb = 0.0;
    for k in 0..c {
        let mut n_k = 0.0;
        for (r, &y) in x.iter().zip(labels) {
            if y == k {
                sw += 1.0 - cos(r, &means[k]);
                n_k += 1.0;
            }
        }
        sb += n_k * (1.0 - cos(&means[k], &global));
    }
    sw / sb
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| {
        let mut r = r.clone();
        r.push(v);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()).unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..=n {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Mahalanobis confidence via an explicit covariance and a dense solve.
/// `epsilon = None` uses `1e-6 * trace / D`.
pub fn dense_mahalanobis(
    train: &DMatrix<f64>,
    labels: &[usize],
    c: usize,
    epsilon: Option<f64>,
    queries: &DMatrix<f64>,
) -> Vec<f64> {
    let x = rows(train);
    let d = x[0].len();
    let means = class_means(&x, labels, c);
    let mut cov = vec![vec![0.0; d]; d];
    for (r, &y) in x.iter().zip(labels) {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += (r[a] - means[y][a]) * (r[b] - means[y][b]);
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= x.len() as f64;
        }
    }
    let eps = epsilon.unwrap_or_else(|| 1e-6 * (0..d).map(|j| cov[j][j]).sum::<f64>() / d as f64);
    for (j, row) in cov.iter_mut().enumerate() {
        row[j] += eps;
    }
    rows(queries)
        .iter()
        .map(|q| {
            let best = means
                .iter()
                .map(|m| {
                    let diff: Vec<f64> = q.iter().zip(m).map(|(a, b)| a - b).collect();
                    dot(&diff, &dense_solve(&cov, &diff))
                })
                .fold(f64::INFINITY, f64::min);
            -best
        })
        .collect()
}
