use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A `(C-1) x C` matrix of class vectors, one column per class.
///
/// Immutable once constructed. Matrices produced by
/// [`build_separation_matrix`] satisfy the separation invariants exactly up to
/// rounding; matrices wrapped with [`SeparationMatrix::from_entries`] are only
/// shape-checked and should be run through
/// [`verify_separation`](super::verify_separation).
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationMatrix {
    entries: DMatrix<f64>,
}

impl SeparationMatrix {
    /// Wrap an existing `(C-1) x C` matrix without checking separation.
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if cols < 2 {
            return Err(Error::InvalidArgument(format!(
                "separation matrix needs at least 2 columns, got {cols}"
            )));
        }
        if rows + 1 != cols {
            return Err(Error::shape(
                "separation matrix",
                format!("{} x {cols}", cols - 1),
                format!("{rows} x {cols}"),
            ));
        }
        Ok(Self { entries })
    }

    pub fn num_classes(&self) -> usize {
        self.entries.ncols()
    }

    pub fn embed_dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Class vector of class `j`.
    pub fn class_vector(&self, j: usize) -> nalgebra::DVectorView<'_, f64> {
        self.entries.column(j)
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Build the separation matrix for `num_classes` classes.
///
/// Unrolls the recursion `P_1 = (1, -1)`,
/// `P_m = [[1, -1/m * 1^T], [0, sqrt(1 - 1/m^2) * P_{m-1}]]`: row `r` of
/// `P_k` is the first row of `P_{k-r}`, scaled by the product of every
/// shrink factor applied above it. Runs in `O(C^2)` time and space.
pub fn build_separation_matrix(num_classes: usize) -> Result<SeparationMatrix> {
    if num_classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    let k = num_classes - 1;
    let mut entries = DMatrix::<f64>::zeros(k, num_classes);
    let mut scale = 1.0f64;
    for row in 0..k {
        let level = (k - row) as f64;
        entries[(row, row)] = scale;
        let off = -scale / level;
        for col in row + 1..num_classes {
            entries[(row, col)] = off;
        }
        scale *= (1.0 - 1.0 / (level * level)).sqrt();
    }
    Ok(SeparationMatrix { entries })
}
