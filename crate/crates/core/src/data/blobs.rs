use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Isotropic Gaussian classes around randomly drawn means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    /// Class means are `mean_scale * N(0, I)`.
    pub mean_scale: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.samples_per_class == 0 {
            return Err(Error::InvalidArgument(format!("empty blob spec {self:?}")));
        }
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!("blob dim must be >= 2, got {}", self.dim)));
        }
        if !(self.mean_scale > 0.0 && self.mean_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("mean scale must be > 0, got {}", self.mean_scale)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise std must be >= 0, got {}", self.noise_std)));
        }
        Ok(())
    }

    /// `C x D` class means; depends only on the seed, class count, dim and scale.
    pub fn class_means(&self) -> DMatrix<f64> {
        let mut rng = rng_for(self.seed, "blob-means");
        DMatrix::from_fn(self.num_classes, self.dim, |_, _| {
            self.mean_scale * rng.sample::<f64, _>(StandardNormal)
        })
    }
}

/// Samples are grouped by class: class 0 first.
pub fn gen_blobs(spec: &BlobSpec) -> Result<Dataset> {
    spec.validate()?;
    let means = spec.class_means();
    let mut rng = rng_for(spec.seed, "blob-noise");
    let n = spec.num_classes * spec.samples_per_class;
    // Row-major fill so the noise stream order does not depend on storage order.
    let mut values = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..spec.num_classes {
        for _ in 0..spec.samples_per_class {
            for j in 0..spec.dim {
                let noise: f64 = rng.sample(StandardNormal);
                values.push(means[(class, j)] + spec.noise_std * noise);
            }
            labels.push(class);
        }
    }
    Dataset::new(
        DMatrix::from_row_slice(n, spec.dim, &values),
        labels,
        spec.num_classes,
    )
}
