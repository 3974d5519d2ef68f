//! Structured-operator recovery and linear operator-learning laboratory.
//!
//! * [`numerics`]: dense linear algebra, FFT, quadrature, seeded Gaussian streams.
//! * [`structured`]: low-rank, circulant, banded, HODLR and dense operators and
//!   the query-counting [`MatvecOracle`](structured::MatvecOracle).
//! * [`recovery`]: randomized SVD, circulant, banded and HODLR recovery.
//! * [`sample`]: grids and grid-discretized functions.
//! * [`probes`]: Gaussian-process source terms via Karhunen–Loève expansions.
//! * [`pdelab`]: Poisson, Darcy, Burgers and screened-Poisson solvers and
//!   dataset synthesis.
//! * [`opfit`]: grid-kernel, low-rank, Fourier-multiplier, banded and
//!   hierarchical operator models, losses and super-resolution evaluation.
//!
//! The linear-algebra layers are generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix `f64`, the precision every tolerance in this crate
//! is stated for.

pub mod numerics;
pub mod opfit;
pub mod pdelab;
pub mod probes;
pub mod recovery;
pub mod sample;
pub mod scalar;
pub mod structured;

pub use scalar::Scalar;

pub type Matrix = numerics::DenseMatrix<f64>;
pub type MatrixF32 = numerics::DenseMatrix<f32>;
pub type Oracle = structured::MatvecOracle<f64>;
pub type Operator = structured::StructuredOperator<f64>;
