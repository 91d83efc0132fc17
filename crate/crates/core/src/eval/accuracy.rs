use crate::error::{Error, Result};

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::shape("accuracy", labels.len(), predictions.len()));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Fraction correct per class; `None` for classes with no samples.
pub fn per_class_accuracy(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Option<f64>>> {
    if predictions.len() != labels.len() {
        return Err(Error::shape("per_class_accuracy", labels.len(), predictions.len()));
    }
    let mut hits = vec![0usize; num_classes];
    let mut totals = vec![0usize; num_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes,
            });
        }
        totals[y] += 1;
        if p == y {
            hits[y] += 1;
        }
    }
    Ok(hits
        .into_iter()
        .zip(totals)
        .map(|(h, t)| (t > 0).then(|| h as f64 / t as f64))
        .collect())
}

/// Mean over the defined entries, `None` if there are none.
pub fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}
