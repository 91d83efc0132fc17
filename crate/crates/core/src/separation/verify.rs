use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SeparationMatrix;
use crate::rng::rng_for;

/// Outcome of [`verify_separation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `max_j | ||p_j|| - 1 |`
    pub max_norm_deviation: f64,
    /// `max_{i != j} | <p_i, p_j> + 1/k |`
    pub max_cosine_deviation: f64,
    /// `|| sum_j p_j ||`
    pub mean_vector_norm: f64,
    /// Number of column pairs whose dot product was checked.
    pub pairs_checked: u64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Up to this many classes every pair is checked; above it pairs are sampled.
    pub exact_limit: usize,
    pub sample_pairs: u64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            exact_limit: 2000,
            sample_pairs: 1_000_000,
            seed: 0,
        }
    }
}

/// Check the separation invariants with default options.
pub fn verify_separation(p: &SeparationMatrix, tolerance: f64) -> VerificationReport {
    verify_separation_with(p, tolerance, &VerifyOptions::default())
}

pub fn verify_separation_with(
    p: &SeparationMatrix,
    tolerance: f64,
    opts: &VerifyOptions,
) -> VerificationReport {
    let m = p.entries();
    let (k, c) = m.shape();
    let target = -1.0 / k as f64;

    let finite = m.iter().all(|v| v.is_finite());
    let max_norm_deviation = (0..c)
        .map(|j| (m.column(j).norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let mean_vector_norm = m.column_sum().norm();

    // Dot products only need to run over the shorter of the two columns'
    // nonzero prefixes; for the constructed matrix that halves the work.
    let support: Vec<usize> = (0..c)
        .map(|j| column(m, j).iter().rposition(|v| *v != 0.0).map_or(0, |r| r + 1))
        .collect();
    let dot = |i: usize, j: usize| {
        let n = support[i].min(support[j]);
        column(m, i)[..n]
            .iter()
            .zip(&column(m, j)[..n])
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };

    let mut max_cosine_deviation = 0.0f64;
    let mut pairs_checked = 0u64;
    if c <= opts.exact_limit {
        for i in 0..c {
            for j in i + 1..c {
                max_cosine_deviation = max_cosine_deviation.max((dot(i, j) - target).abs());
                pairs_checked += 1;
            }
        }
    } else {
        let mut rng = rng_for(opts.seed, "verify-pairs");
        for _ in 0..opts.sample_pairs {
            let i = rng.random_range(0..c);
            let mut j = rng.random_range(0..c - 1);
            if j >= i {
                j += 1;
            }
            max_cosine_deviation = max_cosine_deviation.max((dot(i, j) - target).abs());
            pairs_checked += 1;
        }
    }

    let passed = finite
        && max_norm_deviation <= tolerance
        && max_cosine_deviation <= tolerance
        && mean_vector_norm <= tolerance;
    VerificationReport {
        max_norm_deviation,
        max_cosine_deviation,
        mean_vector_norm,
        pairs_checked,
        tolerance,
        passed,
    }
}

fn column(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let k = m.nrows();
    &m.as_slice()[j * k..(j + 1) * k]
}

/// `C x C` matrix of cosine similarities between class vectors.
pub fn pairwise_cosine_matrix(p: &SeparationMatrix) -> DMatrix<f64> {
    let m = p.entries();
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    let mut gram = m.transpose() * m;
    let c = gram.nrows();
    for i in 0..c {
        for j in 0..c {
            gram[(i, j)] = if i == j {
                1.0
            } else {
                gram[(i, j)] / (norms[i] * norms[j])
            };
        }
    }
    gram
}
