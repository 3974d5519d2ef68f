//! Dense linear algebra, FFT, quadrature and seeded randomness shared by the
//! rest of the crate.
//!
//! FFT convention everywhere: the forward transform is unnormalized and the
//! inverse carries the `1/n` factor.

mod dense;
mod fft;
mod linalg;
mod quadrature;
mod rng;

use thiserror::Error;

pub use dense::{dot, norm2, relative_frobenius_error, DenseMatrix};
pub use fft::{fft_forward, fft_inverse, FftPlan};
pub use linalg::{
    eigh, lstsq_ridge, qr_thin, svd_dense, QrFactors, RidgeSolution, RidgeSolver, SvdFactors, SymmetricEigen,
};
pub use quadrature::{periodic_weights, trapezoid_weights};
pub use rng::{gaussian_vector, RngStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry")]
    NonFinite,
    #[error("QR needs rows >= cols, got {rows}x{cols}")]
    WideMatrix { rows: usize, cols: usize },
    #[error("ridge parameter must be nonnegative, got {0}")]
    NegativeRidge(f64),
    #[error("grid must be strictly increasing (violated at index {0})")]
    NonMonotoneGrid(usize),
    #[error("grid needs at least {needed} points, got {found}")]
    GridTooShort { needed: usize, found: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}
