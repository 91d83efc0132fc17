use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Class means with a shared covariance, factored once for scoring.
#[derive(Debug, Clone)]
pub struct ClassStats {
    /// `C x D`, one mean per row.
    pub means: DMatrix<f64>,
    /// Pooled covariance of class-centered features, without regularization.
    pub covariance: DMatrix<f64>,
    pub epsilon: f64,
    factor: Cholesky<f64, Dyn>,
}

impl ClassStats {
    pub fn num_classes(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// `(x - mu_c)^T (Sigma + eps I)^{-1} (x - mu_c)`
    pub fn squared_distance(&self, x: &[f64], class: usize) -> f64 {
        let diff = nalgebra::DVector::from_iterator(
            x.len(),
            x.iter().zip(self.means.row(class).iter()).map(|(a, b)| a - b),
        );
        // With Sigma = L L^T the form is |L^{-1} diff|^2.
        let z = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a nonzero diagonal");
        z.norm_squared()
    }
}

/// Fit per-class means and the shared covariance
/// `(1/N) sum_i (f_i - mu_{y_i})(f_i - mu_{y_i})^T`. `epsilon = None` uses
/// `1e-6 * trace(Sigma) / D`.
pub fn fit_class_stats(
    features: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
    epsilon: Option<f64>,
) -> Result<ClassStats> {
    let (n, d) = features.shape();
    if labels.len() != n {
        return Err(Error::shape("fit_class_stats labels", n, labels.len()));
    }
    let mut means = DMatrix::zeros(num_classes, d);
    let mut counts = vec![0usize; num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes,
            });
        }
        let mut row = means.row_mut(y);
        row += features.row(i);
        counts[y] += 1;
    }
    if let Some(c) = counts.iter().position(|&k| k == 0) {
        return Err(Error::Degenerate(format!("class {c} has no samples")));
    }
    for (c, &k) in counts.iter().enumerate() {
        means.row_mut(c).scale_mut(1.0 / k as f64);
    }
    let mut centered = features.clone();
    for (i, &y) in labels.iter().enumerate() {
        let mut row = centered.row_mut(i);
        row -= means.row(y);
    }
    let mut covariance = centered.transpose() * &centered / n as f64;
    // Symmetrize away rounding asymmetry.
    covariance = (&covariance + covariance.transpose()) * 0.5;

    let epsilon = match epsilon {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {e}"))),
        None => {
            let e = 1e-6 * covariance.trace() / d as f64;
            if e > 0.0 {
                e
            } else {
                1e-12
            }
        }
    };
    let mut regularized = covariance.clone();
    for j in 0..d {
        regularized[(j, j)] += epsilon;
    }
    let factor = Cholesky::new(regularized).ok_or_else(|| {
        Error::Numerical("regularized covariance is not positive definite".into())
    })?;
    Ok(ClassStats {
        means,
        covariance,
        epsilon,
        factor,
    })
}

/// `-min_c (f - mu_c)^T (Sigma + eps I)^{-1} (f - mu_c)` per row.
pub fn mahalanobis_score(stats: &ClassStats, features: &DMatrix<f64>) -> Result<Vec<f64>> {
    if features.ncols() != stats.dim() {
        return Err(Error::shape("mahalanobis_score features", stats.dim(), features.ncols()));
    }
    Ok(features
        .row_iter()
        .map(|row| {
            let x: Vec<f64> = row.iter().copied().collect();
            let best = (0..stats.num_classes())
                .map(|c| stats.squared_distance(&x, c))
                .fold(f64::INFINITY, f64::min);
            -best
        })
        .collect())
}
