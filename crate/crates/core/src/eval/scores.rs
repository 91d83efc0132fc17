use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::nn::log_sum_exp;

/// Maximum softmax probability per row.
pub fn msp_score(logits: &DMatrix<f64>) -> Vec<f64> {
    logits
        .row_iter()
        .map(|row| {
            let max = row.max();
            1.0 / row.iter().map(|v| (v - max).exp()).sum::<f64>()
        })
        .collect()
}

/// Negative free energy `T * log sum_c exp(logit_c / T)` per row.
pub fn energy_score(logits: &DMatrix<f64>, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    Ok(logits
        .row_iter()
        .map(|row| temperature * log_sum_exp(row.iter().map(|v| v / temperature)))
        .collect())
}

/// Largest logit per row.
pub fn mls_score(logits: &DMatrix<f64>) -> Vec<f64> {
    logits.row_iter().map(|row| row.max()).collect()
}
