use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

/// Angular Fisher score `S_w / S_b` of a feature matrix (lower is better).
///
/// `S_w = sum_i sum_{x in class i} (1 - cos(x, m_i))` and
/// `S_b = sum_i n_i (1 - cos(m_i, m))`, where `m_i` are class means and `m`
/// the mean of all samples.
pub fn angular_fisher_score(
    features: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
) -> Result<f64> {
    let (n, d) = features.shape();
    if labels.len() != n {
        return Err(Error::shape("angular_fisher_score labels", n, labels.len()));
    }
    let mut sums = vec![DVector::<f64>::zeros(d); num_classes];
    let mut counts = vec![0usize; num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes,
            });
        }
        sums[y] += features.row(i).transpose();
        counts[y] += 1;
    }
    if let Some(c) = counts.iter().position(|&k| k == 0) {
        return Err(Error::Degenerate(format!("class {c} has no samples")));
    }
    let global: DVector<f64> = sums.iter().sum::<DVector<f64>>() / n as f64;
    let means: Vec<DVector<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &k)| s / k as f64)
        .collect();
    if let Some(c) = means.iter().position(|m| m.norm() == 0.0) {
        return Err(Error::Degenerate(format!("class {c} mean has zero norm")));
    }
    if global.norm() == 0.0 {
        return Err(Error::Degenerate("global mean has zero norm".into()));
    }

    let mut within = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let x = features.row(i).transpose();
        if x.norm() == 0.0 {
            return Err(Error::Degenerate(format!("sample {i} has zero norm")));
        }
        within += 1.0 - cosine(&x, &means[y]);
    }
    let between: f64 = means
        .iter()
        .zip(&counts)
        .map(|(m, &k)| k as f64 * (1.0 - cosine(m, &global)))
        .sum();
    if between == 0.0 {
        return Err(Error::UndefinedScore(
            "between-class angular scatter is zero".into(),
        ));
    }
    Ok(within / between)
}
