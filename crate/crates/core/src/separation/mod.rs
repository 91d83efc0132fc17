//! The maximally separated class-vector matrix.
//!
//! For `C` classes the matrix has `k = C - 1` rows and `C` columns. Column
//! `j` is the class vector of class `j`. All columns have unit norm, every
//! pair of distinct columns has dot product `-1/k`, and the columns sum to
//! zero: they are the vertices of a regular simplex inscribed in the unit
//! sphere of `R^k`.

mod head;
mod io;
mod matrix;
mod verify;

pub use head::{head_backward, head_forward, Radius};
pub use io::{load_matrix, matrix_to_csv, save_matrix, LOAD_TOLERANCE};
pub use matrix::{build_separation_matrix, SeparationMatrix};
pub use verify::{
    pairwise_cosine_matrix, verify_separation, verify_separation_with, VerificationReport,
    VerifyOptions,
};
