use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Label carried by samples that belong to no training class.
pub const OOD_LABEL: usize = usize::MAX;

/// Feature matrix (`N x D`, one sample per row) with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    name: Option<String>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::shape("dataset labels", features.nrows(), labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                num_classes,
            });
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            name: None,
        })
    }

    /// Samples with no class; every label is [`OOD_LABEL`].
    pub fn unlabeled(features: DMatrix<f64>, num_classes: usize) -> Self {
        let labels = vec![OOD_LABEL; features.nrows()];
        Self {
            features,
            labels,
            num_classes,
            name: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.iter().all(|&y| y < self.num_classes)
    }

    /// Per-class sample counts; unlabeled samples are not counted.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            if y < self.num_classes {
                counts[y] += 1;
            }
        }
        counts
    }

    /// Indices of every sample of each class, in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            if y < self.num_classes {
                out[y].push(i);
            }
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            name: self.name.clone(),
        }
    }

    /// Split into the first `n_first` samples of every class and the rest.
    pub fn split_per_class(&self, n_first: usize) -> Result<(Self, Self)> {
        let mut first = Vec::new();
        let mut rest = Vec::new();
        for (class, idx) in self.class_indices().into_iter().enumerate() {
            if idx.len() < n_first {
                return Err(Error::Capacity {
                    class,
                    requested: n_first,
                    available: idx.len(),
                });
            }
            first.extend_from_slice(&idx[..n_first]);
            rest.extend_from_slice(&idx[n_first..]);
        }
        first.sort_unstable();
        rest.sort_unstable();
        Ok((self.subset(&first), self.subset(&rest)))
    }

    /// Keep only samples of `classes`, relabelled `0..classes.len()` in the
    /// given order.
    pub fn restrict_classes(&self, classes: &[usize]) -> Result<Self> {
        let mut map = vec![None; self.num_classes];
        for (new, &old) in classes.iter().enumerate() {
            if old >= self.num_classes {
                return Err(Error::LabelOutOfRange {
                    label: old,
                    num_classes: self.num_classes,
                });
            }
            if map[old].replace(new).is_some() {
                return Err(Error::InvalidArgument(format!("class {old} listed twice")));
            }
        }
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.labels[i] < self.num_classes && map[self.labels[i]].is_some())
            .collect();
        let features = self.features.select_rows(&keep);
        let labels = keep.iter().map(|&i| map[self.labels[i]].unwrap()).collect();
        Ok(Self {
            features,
            labels,
            num_classes: classes.len(),
            name: self.name.clone(),
        })
    }

    /// Header `label,f0,...,f{D-1}`; unlabeled samples print `-1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for j in 0..self.dim() {
            write!(out, ",f{j}").unwrap();
        }
        out.push('\n');
        for (i, &y) in self.labels.iter().enumerate() {
            if y == OOD_LABEL {
                out.push_str("-1");
            } else {
                write!(out, "{y}").unwrap();
            }
            for v in self.features.row(i).iter() {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
