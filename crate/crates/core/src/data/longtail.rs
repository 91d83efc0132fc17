use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Exponentially decaying per-class sample counts; class 0 is the head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceProfile {
    pub imbalance_factor: f64,
    pub per_class_counts: Vec<usize>,
}

/// `count_i = max(1, round(n_max * factor^(i / (C - 1))))`.
pub fn make_longtail_profile(
    num_classes: usize,
    n_max: usize,
    imbalance_factor: f64,
) -> Result<ImbalanceProfile> {
    if !(imbalance_factor > 0.0 && imbalance_factor <= 1.0) {
        return Err(Error::InvalidProfile(format!(
            "imbalance factor must be in (0, 1], got {imbalance_factor}"
        )));
    }
    if n_max == 0 || num_classes == 0 {
        return Err(Error::InvalidProfile(format!(
            "need n_max >= 1 and at least one class, got n_max={n_max}, C={num_classes}"
        )));
    }
    let denom = num_classes.saturating_sub(1).max(1) as f64;
    let per_class_counts: Vec<usize> = (0..num_classes)
        .map(|i| {
            let c = (n_max as f64 * imbalance_factor.powf(i as f64 / denom)).round();
            (c as usize).max(1)
        })
        .collect();
    if per_class_counts.contains(&0) {
        return Err(Error::InvalidProfile("a class would be empty".into()));
    }
    Ok(ImbalanceProfile {
        imbalance_factor,
        per_class_counts,
    })
}

/// Keep `count_i` samples of class `i`, chosen by a seeded shuffle.
/// Retained samples stay in their original relative order.
pub fn subsample_longtail(ds: &Dataset, profile: &ImbalanceProfile, seed: u64) -> Result<Dataset> {
    if profile.per_class_counts.len() != ds.num_classes() {
        return Err(Error::shape(
            "imbalance profile classes",
            ds.num_classes(),
            profile.per_class_counts.len(),
        ));
    }
    let mut rng = rng_for(seed, "longtail-subsample");
    let mut keep = Vec::new();
    for (class, mut idx) in ds.class_indices().into_iter().enumerate() {
        let want = profile.per_class_counts[class];
        if idx.len() < want {
            return Err(Error::Capacity {
                class,
                requested: want,
                available: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        keep.extend_from_slice(&idx[..want]);
    }
    keep.sort_unstable();
    Ok(ds.subset(&keep))
}
