use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OodKind {
    /// Uniform over the per-dimension bounding box of the reference features.
    UniformNoise,
    /// Gaussian blobs around the reference class means, each mean moved by
    /// `offset` along its own random direction. Noise matches the pooled
    /// within-class spread of the reference.
    ShiftedBlobs { offset: f64 },
}

/// Draw `n` unlabeled samples relative to `reference`.
pub fn gen_ood(kind: &OodKind, reference: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("OOD set needs n >= 1".into()));
    }
    if reference.is_empty() {
        return Err(Error::InvalidArgument("empty reference dataset".into()));
    }
    let x = reference.features();
    let d = x.ncols();
    let features = match kind {
        OodKind::UniformNoise => {
            let mut rng = rng_for(seed, "ood-uniform");
            let lo: Vec<f64> = x.column_iter().map(|c| c.min()).collect();
            let hi: Vec<f64> = x.column_iter().map(|c| c.max()).collect();
            let mut values = Vec::with_capacity(n * d);
            for _ in 0..n {
                for j in 0..d {
                    let u: f64 = rng.random();
                    values.push(lo[j] + u * (hi[j] - lo[j]));
                }
            }
            DMatrix::from_row_slice(n, d, &values)
        }
        OodKind::ShiftedBlobs { offset } => {
            if !reference.is_labeled() {
                return Err(Error::InvalidArgument(
                    "shifted blobs need a labeled reference".into(),
                ));
            }
            let (means, present) = class_means(reference);
            let noise_std = pooled_std(reference, &means);
            let mut rng = rng_for(seed, "ood-shifted");
            let shifted: Vec<DVector<f64>> = present
                .iter()
                .map(|&c| {
                    let dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let norm = dir.norm();
                    means.row(c).transpose() + dir * (*offset / norm)
                })
                .collect();
            let mut values = Vec::with_capacity(n * d);
            for _ in 0..n {
                let m = &shifted[rng.random_range(0..shifted.len())];
                for j in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    values.push(m[j] + noise_std * z);
                }
            }
            DMatrix::from_row_slice(n, d, &values)
        }
    };
    Ok(Dataset::unlabeled(features, reference.num_classes()).with_name(match kind {
        OodKind::UniformNoise => "uniform_noise",
        OodKind::ShiftedBlobs { .. } => "shifted_blobs",
    }))
}

/// Empirical class means (rows) and the list of classes that have samples.
fn class_means(ds: &Dataset) -> (DMatrix<f64>, Vec<usize>) {
    let c = ds.num_classes();
    let mut means = DMatrix::zeros(c, ds.dim());
    let counts = ds.class_counts();
    for (i, &y) in ds.labels().iter().enumerate() {
        let mut row = means.row_mut(y);
        row += ds.features().row(i);
    }
    for (k, &n) in counts.iter().enumerate() {
        if n > 0 {
            means.row_mut(k).scale_mut(1.0 / n as f64);
        }
    }
    let present = (0..c).filter(|&k| counts[k] > 0).collect();
    (means, present)
}

fn pooled_std(ds: &Dataset, means: &DMatrix<f64>) -> f64 {
    let ss: f64 = ds
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &y)| (ds.features().row(i) - means.row(y)).norm_squared())
        .sum();
    (ss / (ds.len() * ds.dim()) as f64).sqrt()
}
