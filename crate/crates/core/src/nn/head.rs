use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{DenseLayer, Param};
use crate::error::{Error, Result};
use crate::separation::{head_backward, head_forward, Radius, SeparationMatrix};

/// Which logit head sits on top of the feature layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// `rho * P^T x` with `P` fixed.
    MaxSepFixed,
    /// `rho * W^T x` with `W` learnable and initialized to `P`.
    MaxSepLearnableInit,
    /// `W^T x` with `W: (C-1) x C` learnable, fan-in uniform init.
    RandomLearnable,
    /// Ordinary affine classifier `W^T x + b`.
    StandardLinear,
}

impl HeadKind {
    pub const ALL: [HeadKind; 4] = [
        HeadKind::MaxSepFixed,
        HeadKind::MaxSepLearnableInit,
        HeadKind::RandomLearnable,
        HeadKind::StandardLinear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::MaxSepFixed => "max_sep_fixed",
            HeadKind::MaxSepLearnableInit => "max_sep_learnable_init",
            HeadKind::RandomLearnable => "random_learnable",
            HeadKind::StandardLinear => "standard_linear",
        }
    }

    /// Whether the feature width is pinned to `C - 1`.
    pub fn needs_simplex_dim(self) -> bool {
        !matches!(self, HeadKind::StandardLinear)
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeadKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown head kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    MaxSepFixed {
        matrix: Arc<SeparationMatrix>,
        rho: Radius,
    },
    MaxSepLearnableInit {
        weight: Param,
        rho: Radius,
    },
    RandomLearnable {
        weight: Param,
    },
    StandardLinear {
        layer: DenseLayer,
    },
}

impl Head {
    pub fn new<R: Rng + ?Sized>(
        kind: HeadKind,
        feature_dim: usize,
        num_classes: usize,
        rho: Radius,
        separation: Option<Arc<SeparationMatrix>>,
        rng: &mut R,
    ) -> Result<Self> {
        if kind.needs_simplex_dim() && feature_dim + 1 != num_classes {
            return Err(Error::shape(
                "head feature dim",
                num_classes.saturating_sub(1),
                feature_dim,
            ));
        }
        let matrix = || -> Result<Arc<SeparationMatrix>> {
            match &separation {
                Some(m) if m.num_classes() == num_classes => Ok(Arc::clone(m)),
                Some(m) => Err(Error::shape("separation matrix classes", num_classes, m.num_classes())),
                None => crate::separation::build_separation_matrix(num_classes).map(Arc::new),
            }
        };
        Ok(match kind {
            HeadKind::MaxSepFixed => Head::MaxSepFixed {
                matrix: matrix()?,
                rho,
            },
            HeadKind::MaxSepLearnableInit => Head::MaxSepLearnableInit {
                weight: Param::new(matrix()?.entries().clone(), true),
                rho,
            },
            HeadKind::RandomLearnable => Head::RandomLearnable {
                weight: Param::fan_in_uniform(feature_dim, num_classes, feature_dim, true, rng),
            },
            HeadKind::StandardLinear => Head::StandardLinear {
                layer: DenseLayer::new(feature_dim, num_classes, rng),
            },
        })
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            Head::MaxSepFixed { .. } => HeadKind::MaxSepFixed,
            Head::MaxSepLearnableInit { .. } => HeadKind::MaxSepLearnableInit,
            Head::RandomLearnable { .. } => HeadKind::RandomLearnable,
            Head::StandardLinear { .. } => HeadKind::StandardLinear,
        }
    }

    pub fn forward(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Head::MaxSepFixed { matrix, rho } => head_forward(matrix, *rho, features),
            Head::MaxSepLearnableInit { weight, rho } => {
                Ok(features * &weight.value * rho.get())
            }
            Head::RandomLearnable { weight } => Ok(features * &weight.value),
            Head::StandardLinear { layer } => Ok(layer.forward(features)),
        }
    }

    /// Accumulate head parameter gradients; return the gradient w.r.t. features.
    pub fn backward(
        &mut self,
        features: &DMatrix<f64>,
        grad_logits: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        match self {
            Head::MaxSepFixed { matrix, rho } => head_backward(matrix, *rho, grad_logits),
            Head::MaxSepLearnableInit { weight, rho } => {
                weight.grad.gemm_tr(rho.get(), features, grad_logits, 1.0);
                Ok(grad_logits * weight.value.transpose() * rho.get())
            }
            Head::RandomLearnable { weight } => {
                weight.grad.gemm_tr(1.0, features, grad_logits, 1.0);
                Ok(grad_logits * weight.value.transpose())
            }
            Head::StandardLinear { layer } => Ok(layer.backward(features, grad_logits)),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Head::MaxSepFixed { .. } => vec![],
            Head::MaxSepLearnableInit { weight, .. } | Head::RandomLearnable { weight } => {
                vec![weight]
            }
            Head::StandardLinear { layer } => vec![&layer.weight, &layer.bias],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Head::MaxSepFixed { .. } => vec![],
            Head::MaxSepLearnableInit { weight, .. } | Head::RandomLearnable { weight } => {
                vec![weight]
            }
            Head::StandardLinear { layer } => vec![&mut layer.weight, &mut layer.bias],
        }
    }

    /// The fixed separation matrix, if this head has one.
    pub fn separation_matrix(&self) -> Option<&SeparationMatrix> {
        match self {
            Head::MaxSepFixed { matrix, .. } => Some(matrix),
            _ => None,
        }
    }

    pub fn rho(&self) -> Option<Radius> {
        match self {
            Head::MaxSepFixed { rho, .. } | Head::MaxSepLearnableInit { rho, .. } => Some(*rho),
            _ => None,
        }
    }
}
