use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `log(sum(exp(v)))` computed around the maximum.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let it = values.into_iter();
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + it.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax of one logit row.
pub fn softmax_row<I>(values: I) -> Vec<f64>
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let it = values.into_iter();
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = it.map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean cross-entropy of `softmax(logits)` against `labels`, and its gradient
/// `(softmax - onehot) / N` with respect to the logits.
pub fn softmax_cross_entropy(
    logits: &DMatrix<f64>,
    labels: &[usize],
) -> Result<(f64, DMatrix<f64>)> {
    let (n, c) = logits.shape();
    if labels.len() != n {
        return Err(Error::shape("softmax_cross_entropy labels", n, labels.len()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut grad = DMatrix::zeros(n, c);
    let mut total = 0.0;
    let inv_n = 1.0 / n as f64;
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes: c,
            });
        }
        let row = logits.row(i);
        let lse = log_sum_exp(row.iter().copied());
        total += lse - row[y];
        for j in 0..c {
            grad[(i, j)] = (row[j] - lse).exp() * inv_n;
        }
        grad[(i, y)] -= inv_n;
    }
    Ok((total * inv_n, grad))
}
