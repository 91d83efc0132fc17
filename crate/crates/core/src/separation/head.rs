use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SeparationMatrix;
use crate::error::{Error, Result};

/// Positive scale applied to the fixed logits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Radius(f64);

impl Radius {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho > 0.0 {
            Ok(Self(rho))
        } else {
            Err(Error::InvalidArgument(format!("radius must be positive, got {rho}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Radius {
    fn default() -> Self {
        Self(1.0)
    }
}

impl TryFrom<f64> for Radius {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Radius::new(v)
    }
}

impl From<Radius> for f64 {
    fn from(r: Radius) -> f64 {
        r.0
    }
}

/// Logits `rho * P^T x` for every row `x` of `features` (`N x k` -> `N x C`).
pub fn head_forward(
    p: &SeparationMatrix,
    rho: Radius,
    features: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if features.ncols() != p.embed_dim() {
        return Err(Error::shape(
            "head_forward features",
            format!("N x {}", p.embed_dim()),
            format!("{} x {}", features.nrows(), features.ncols()),
        ));
    }
    let mut out = features * p.entries();
    if rho.get() != 1.0 {
        out *= rho.get();
    }
    Ok(out)
}

/// Adjoint of [`head_forward`]: `rho * P g` for every row `g` of `grad_logits`.
pub fn head_backward(
    p: &SeparationMatrix,
    rho: Radius,
    grad_logits: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if grad_logits.ncols() != p.num_classes() {
        return Err(Error::shape(
            "head_backward grad_logits",
            format!("N x {}", p.num_classes()),
            format!("{} x {}", grad_logits.nrows(), grad_logits.ncols()),
        ));
    }
    let mut out = grad_logits * p.entries().transpose();
    if rho.get() != 1.0 {
        out *= rho.get();
    }
    Ok(out)
}
