use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::head::{Head, HeadKind};
use super::layer::{DenseLayer, Param};
use crate::error::{Error, Result};
use crate::separation::{Radius, SeparationMatrix};

/// Layer widths. `hidden` may be empty, in which case a single dense layer
/// maps inputs straight to features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub num_classes: usize,
}

impl Architecture {
    /// Feature width pinned to `C - 1`.
    pub fn simplex(input_dim: usize, hidden: Vec<usize>, num_classes: usize) -> Self {
        Self {
            input_dim,
            hidden,
            feature_dim: num_classes.saturating_sub(1),
            num_classes,
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(self.feature_dim);
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    layers: Vec<DenseLayer>,
    head: Head,
    /// Bumped on every parameter update; caches from older versions are stale.
    version: u64,
}

/// Intermediates kept by [`Network::forward`] for [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    /// Input to each dense layer (post-activation of the previous one).
    inputs: Vec<DMatrix<f64>>,
    features: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub features: DMatrix<f64>,
    pub logits: DMatrix<f64>,
    pub cache: ForwardCache,
}

impl Network {
    pub fn new<R: Rng + ?Sized>(
        arch: Architecture,
        head: HeadKind,
        rho: Radius,
        rng: &mut R,
    ) -> Result<Self> {
        Self::with_separation(arch, head, rho, None, rng)
    }

    /// Like [`Network::new`] but reuses an already built separation matrix.
    pub fn with_separation<R: Rng + ?Sized>(
        arch: Architecture,
        head: HeadKind,
        rho: Radius,
        separation: Option<Arc<SeparationMatrix>>,
        rng: &mut R,
    ) -> Result<Self> {
        if arch.input_dim == 0 || arch.feature_dim == 0 || arch.hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!("zero-width layer in {arch:?}")));
        }
        if arch.num_classes < 2 {
            return Err(Error::InvalidArgument("need at least 2 classes".into()));
        }
        let widths = arch.widths();
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer::new(w[0], w[1], rng))
            .collect();
        let head = Head::new(head, arch.feature_dim, arch.num_classes, rho, separation, rng)?;
        Ok(Self {
            arch,
            layers,
            head,
            version: 0,
        })
    }

    /// Assemble a network from explicit parts.
    pub fn from_parts(arch: Architecture, layers: Vec<DenseLayer>, head: Head) -> Result<Self> {
        let widths = arch.widths();
        if layers.len() + 1 != widths.len()
            || layers
                .iter()
                .zip(widths.windows(2))
                .any(|(l, w)| l.in_dim() != w[0] || l.out_dim() != w[1])
        {
            return Err(Error::shape(
                "network layers",
                format!("{widths:?}"),
                format!(
                    "{:?}",
                    layers.iter().map(|l| (l.in_dim(), l.out_dim())).collect::<Vec<_>>()
                ),
            ));
        }
        Ok(Self {
            arch,
            layers,
            head,
            version: 0,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn head_kind(&self) -> HeadKind {
        self.head.kind()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable access to the dense layers. Counts as a parameter update.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn head_mut(&mut self) -> &mut Head {
        self.version += 1;
        &mut self.head
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = self
            .layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect();
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self
            .layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect();
        out.extend(self.head.params_mut());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn forward(&self, batch: &DMatrix<f64>) -> Result<ForwardOutput> {
        if batch.ncols() != self.arch.input_dim {
            return Err(Error::shape(
                "network input",
                format!("N x {}", self.arch.input_dim),
                format!("{} x {}", batch.nrows(), batch.ncols()),
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&x);
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut x, z));
        }
        let features = x;
        let logits = self.head.forward(&features)?;
        Ok(ForwardOutput {
            features: features.clone(),
            logits,
            cache: ForwardCache {
                version: self.version,
                inputs,
                features,
            },
        })
    }

    /// Penultimate features and logits without keeping a cache.
    pub fn infer(&self, batch: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let out = self.forward(batch)?;
        Ok((out.features, out.logits))
    }

    pub fn predict(&self, batch: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.forward(batch)?.logits))
    }

    /// Accumulate gradients of every learnable parameter.
    pub fn backward(&mut self, cache: &ForwardCache, grad_logits: &DMatrix<f64>) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::StaleCache(format!(
                "cache from version {}, network at {}",
                cache.version, self.version
            )));
        }
        if cache.inputs.len() != self.layers.len()
            || grad_logits.nrows() != cache.features.nrows()
            || grad_logits.ncols() != self.arch.num_classes
        {
            return Err(Error::StaleCache(format!(
                "grad_logits {}x{} against cached batch of {}",
                grad_logits.nrows(),
                grad_logits.ncols(),
                cache.features.nrows()
            )));
        }
        let mut grad = self.head.backward(&cache.features, grad_logits)?;
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let input = &cache.inputs[i];
            grad = layer.backward(input, &grad);
            if i > 0 {
                // relu(z) > 0 exactly where z > 0
                grad.zip_apply(input, |g, a| {
                    if a <= 0.0 {
                        *g = 0.0
                    }
                });
            }
        }
        Ok(())
    }
}

/// Index of the largest entry in each row; ties go to the lowest index.
pub fn argmax_rows(m: &DMatrix<f64>) -> Vec<usize> {
    m.row_iter()
        .map(|row| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
