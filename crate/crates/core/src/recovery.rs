//! Recovery of structured matrices from matvec oracles.
//!
//! Query budgets (forward, transpose):
//!
//! | algorithm            | forward                              | transpose       |
//! |----------------------|--------------------------------------|-----------------|
//! | randomized SVD       | `k + p`                              | `k + p`         |
//! | circulant            | `1`                                  | `0`             |
//! | banded               | `min(2w + 1, N)`                     | `0`             |
//! | HODLR peeling        | `Σ_ℓ (s_ℓ + k_ℓ) + N / 2^L`          | `Σ_ℓ (s_ℓ + k_ℓ)` |
//!
//! where `s_ℓ = min(k + p, N / 2^ℓ)` is the sketch width and
//! `k_ℓ = min(k, N / 2^ℓ)` the factor width at level ℓ.

use num_complex::Complex;
use thiserror::Error;

use crate::numerics::{
    gaussian_vector, qr_thin, relative_frobenius_error, svd_dense, DenseMatrix, FftPlan, NumericsError, RngStream,
};
use crate::scalar::Scalar;
use crate::structured::{
    validate_hodlr_shape, BandedOperator, CirculantOperator, HodlrLevel, HodlrOperator, LinearOperator, LowRankBlock,
    LowRankOperator, MatvecOracle, StructuredError,
};

/// Default oversampling for randomized sketches.
pub const DEFAULT_OVERSAMPLING: usize = 5;

/// Relative pivot tolerance on `|FFT(g)_j| / max |FFT(g)|` for circulant recovery.
pub const DEFAULT_FOURIER_TOLERANCE: f64 = 1e-8;

/// A HODLR block sketch whose energy beyond rank `k` exceeds this fraction of
/// the sketch norm is reported as a rank deficit.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("probe has a vanishing Fourier mode {mode} (|ĝ| = {magnitude:e}); retry with a fresh probe")]
    ZeroFourierMode { mode: usize, magnitude: f64 },
    #[error("block {block} at level {level} has rank above {rank} (relative tail {tail:e})")]
    RankDeficit {
        level: usize,
        block: String,
        rank: usize,
        tail: f64,
    },
    #[error(transparent)]
    Structured(#[from] StructuredError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Outcome of one recovery run.
#[derive(Clone, Debug)]
pub struct RecoveryReport<R> {
    pub recovered: R,
    pub forward_queries: usize,
    pub transpose_queries: usize,
    /// `‖Â − A‖_F / ‖A‖_F` when a dense reference was supplied.
    pub residual_frobenius_relative: Option<f64>,
}

impl<R> RecoveryReport<R> {
    fn new<T: Scalar>(recovered: R, oracle: &MatvecOracle<T>, start: (usize, usize)) -> Self {
        Self {
            recovered,
            forward_queries: oracle.forward_queries() - start.0,
            transpose_queries: oracle.transpose_queries() - start.1,
            residual_frobenius_relative: None,
        }
    }

    pub fn total_queries(&self) -> usize {
        self.forward_queries + self.transpose_queries
    }

    /// Fills the residual against a dense reference.
    pub fn with_reference<T: Scalar>(mut self, reference: &DenseMatrix<T>) -> Self
    where
        R: LinearOperator<T>,
    {
        let n = reference.rows();
        let recovered = DenseMatrix::from_columns(
            n,
            &(0..n)
                .map(|j| {
                    let mut e = vec![T::zero(); n];
                    e[j] = T::one();
                    self.recovered.apply(&e)
                })
                .collect::<Vec<_>>(),
        );
        self.residual_frobenius_relative = Some(relative_frobenius_error(&recovered, reference).to_f64_lossy());
        self
    }
}

fn counters<T: Scalar>(o: &MatvecOracle<T>) -> (usize, usize) {
    (o.forward_queries(), o.transpose_queries())
}

fn gaussian_matrix<T: Scalar>(stream: &mut RngStream, rows: usize, cols: usize) -> DenseMatrix<T> {
    DenseMatrix::from_row_major(rows, cols, gaussian_vector(stream, rows * cols)).expect("finite Gaussian draws")
}

/// Randomized SVD from `k + p` forward and `k + p` transpose queries:
/// `Y = AX`, `Y = QR`, `Z = AᵀQ`, `A ≈ QZᵀ`.
pub fn randomized_svd<T: Scalar>(
    oracle: &MatvecOracle<T>,
    rank: usize,
    oversampling: usize,
    stream: &mut RngStream,
) -> Result<RecoveryReport<LowRankOperator<T>>, RecoveryError> {
    let n = oracle.dim();
    let width = rank + oversampling;
    if rank == 0 || width > n {
        return Err(RecoveryError::InvalidParameters(format!(
            "need 1 <= k and k + p <= N, got k = {rank}, p = {oversampling}, N = {n}"
        )));
    }
    let start = counters(oracle);
    let x = gaussian_matrix(stream, n, width);
    let y = oracle.apply(&x)?;
    let q = qr_thin(&y)?.q;
    let z = oracle.apply_transpose(&q)?;
    let recovered = LowRankOperator::new(q, z.transpose())?;
    Ok(RecoveryReport::new(recovered, oracle, start))
}

/// Circulant recovery from a single Gaussian query `y = C_c g = C_g c`, solved
/// in Fourier space as `c = IFFT(FFT(y) ⊘ FFT(g))`.
pub fn recover_circulant<T: Scalar>(
    oracle: &MatvecOracle<T>,
    stream: &mut RngStream,
) -> Result<RecoveryReport<CirculantOperator<T>>, RecoveryError> {
    let g = gaussian_vector(stream, oracle.dim());
    recover_circulant_with_probe(oracle, &g, T::lit(DEFAULT_FOURIER_TOLERANCE))
}

/// [`recover_circulant`] with a caller-chosen probe and relative pivot tolerance.
pub fn recover_circulant_with_probe<T: Scalar>(
    oracle: &MatvecOracle<T>,
    probe: &[T],
    tolerance: T,
) -> Result<RecoveryReport<CirculantOperator<T>>, RecoveryError> {
    let n = oracle.dim();
    if probe.len() != n {
        return Err(StructuredError::DimensionMismatch {
            expected: n,
            found: probe.len(),
        }
        .into());
    }
    let plan = FftPlan::new(n)?;
    let g_hat = plan.forward_real(probe);
    let max = g_hat.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    if let Some((mode, z)) = g_hat
        .iter()
        .enumerate()
        .find(|(_, z)| max == T::zero() || z.norm() <= tolerance * max)
    {
        return Err(RecoveryError::ZeroFourierMode {
            mode,
            magnitude: z.norm().to_f64_lossy(),
        });
    }
    let start = counters(oracle);
    let y = oracle.apply_vector(probe)?;
    let y_hat = plan.forward_real(&y);
    let c_hat: Vec<Complex<T>> = y_hat.iter().zip(&g_hat).map(|(a, b)| a / b).collect();
    let column = plan.inverse_real(&c_hat);
    Ok(RecoveryReport::new(CirculantOperator::new(column)?, oracle, start))
}

/// Column coloring for banded recovery: column `j` gets color `j mod (2w+1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoringSchedule {
    pub num_colors: usize,
    pub color_of: Vec<usize>,
}

impl ColoringSchedule {
    /// Probe matrix whose column `c` is the indicator sum of the columns with color `c`.
    pub fn probes<T: Scalar>(&self) -> DenseMatrix<T> {
        let mut p = DenseMatrix::zeros(self.color_of.len(), self.num_colors);
        for (j, &c) in self.color_of.iter().enumerate() {
            p[(j, c)] = T::one();
        }
        p
    }

    /// True when identically colored columns have disjoint row supports for
    /// bandwidth `w`.
    pub fn is_valid_for_bandwidth(&self, w: usize) -> bool {
        let n = self.color_of.len();
        (0..n).all(|j| ((j + 1)..n.min(j + 2 * w + 1)).all(|k| self.color_of[j] != self.color_of[k]))
    }
}

pub fn banded_coloring(n: usize, bandwidth: usize) -> ColoringSchedule {
    let stride = 2 * bandwidth + 1;
    ColoringSchedule {
        num_colors: stride.min(n),
        color_of: (0..n).map(|j| j % stride).collect(),
    }
}

/// Exact banded recovery from `min(2w+1, N)` indicator-sum probes.
pub fn recover_banded<T: Scalar>(
    oracle: &MatvecOracle<T>,
    bandwidth: usize,
) -> Result<RecoveryReport<BandedOperator<T>>, RecoveryError> {
    let n = oracle.dim();
    let w = bandwidth.min(n.saturating_sub(1));
    let schedule = banded_coloring(n, w);
    let start = counters(oracle);
    let y = oracle.apply(&schedule.probes())?;
    let mut recovered = BandedOperator::zeros(n, w);
    for j in 0..n {
        let c = schedule.color_of[j];
        for i in j.saturating_sub(w)..(j + w + 1).min(n) {
            recovered.set(i, j, y[(i, c)]);
        }
    }
    Ok(RecoveryReport::new(recovered, oracle, start))
}

/// Forward and transpose queries used by [`recover_hodlr`].
pub fn hodlr_query_budget(n: usize, rank: usize, levels: usize, oversampling: usize) -> (usize, usize) {
    let per_side: usize = (1..=levels)
        .map(|l| (rank + oversampling).min(n >> l) + rank.min(n >> l))
        .sum();
    (per_side + (n >> levels), per_side)
}

/// HODLR recovery by top-down peeling.
///
/// At level ℓ all first children share one probe block and all second children
/// another, since sibling blocks at one level occupy disjoint row and column
/// ranges. One forward sweep (Gaussian on second-child columns) sketches every
/// upper block's column space, one transpose sweep (Gaussian on second-child
/// rows) sketches every lower block's row space, and two projection sweeps of
/// width `k` finish the factors. Contributions of coarser levels are
/// subtracted from every sweep. The dense leaves are read off last with
/// `N / 2^L` block-identity probes.
pub fn recover_hodlr<T: Scalar>(
    oracle: &MatvecOracle<T>,
    rank: usize,
    levels: usize,
    oversampling: usize,
    stream: &mut RngStream,
) -> Result<RecoveryReport<HodlrOperator<T>>, RecoveryError> {
    recover_hodlr_with_tolerance(
        oracle,
        rank,
        levels,
        oversampling,
        T::lit(DEFAULT_RANK_TOLERANCE),
        stream,
    )
}

pub fn recover_hodlr_with_tolerance<T: Scalar>(
    oracle: &MatvecOracle<T>,
    rank: usize,
    levels: usize,
    oversampling: usize,
    rank_tolerance: T,
    stream: &mut RngStream,
) -> Result<RecoveryReport<HodlrOperator<T>>, RecoveryError> {
    let n = oracle.dim();
    validate_hodlr_shape(n, levels)?;
    if rank == 0 {
        return Err(RecoveryError::InvalidParameters("HODLR rank must be positive".into()));
    }
    let start = counters(oracle);
    let leaf = n >> levels;
    // Levels are pushed as they are recovered; placeholder leaves keep the
    // partial operator well formed for subtraction.
    let mut recovered: Vec<HodlrLevel<T>> = Vec::with_capacity(levels);
    let zero_leaves = || vec![DenseMatrix::zeros(leaf, leaf); 1 << levels];

    for d in 0..levels {
        let b = n >> (d + 1);
        let nodes = 1usize << d;
        let k = rank.min(b);
        let width = (rank + oversampling).min(b);
        let partial = partial_hodlr(n, rank, &recovered, levels, zero_leaves())?;

        // Column spaces of the upper blocks: probe supported on second children.
        let omega = gaussian_matrix::<T>(stream, n, width);
        let x = second_children_only(&omega, b);
        let y = peel(oracle, &partial, d, &x, false)?;
        let mut upper_bases = Vec::with_capacity(nodes);
        for p in 0..nodes {
            let sketch = y.block(2 * p * b, 0, b, width);
            upper_bases.push(range_basis(&sketch, k, rank_tolerance, d + 1, format!("upper[{p}]"))?);
        }

        // Row spaces of the lower blocks: transpose probe on second-child rows.
        let omega = gaussian_matrix::<T>(stream, n, width);
        let x = second_children_only(&omega, b);
        let y = peel(oracle, &partial, d, &x, true)?;
        let mut lower_bases = Vec::with_capacity(nodes);
        for p in 0..nodes {
            let sketch = y.block(2 * p * b, 0, b, width);
            lower_bases.push(range_basis(&sketch, k, rank_tolerance, d + 1, format!("lower[{p}]"))?);
        }

        // Projections: A12ᵀ Q via the transpose sweep, A21 P via the forward sweep.
        let mut q_stack = DenseMatrix::zeros(n, k);
        let mut p_stack = DenseMatrix::zeros(n, k);
        for p in 0..nodes {
            q_stack.set_block(2 * p * b, 0, &upper_bases[p]);
            p_stack.set_block(2 * p * b, 0, &lower_bases[p]);
        }
        let upper_rows = peel(oracle, &partial, d, &q_stack, true)?;
        let lower_cols = peel(oracle, &partial, d, &p_stack, false)?;

        let mut level = HodlrLevel {
            upper: Vec::with_capacity(nodes),
            lower: Vec::with_capacity(nodes),
        };
        for p in 0..nodes {
            let r2 = 2 * p * b + b;
            level.upper.push(LowRankBlock {
                left: upper_bases[p].clone(),
                right: upper_rows.block(r2, 0, b, k),
            });
            level.lower.push(LowRankBlock {
                left: lower_cols.block(r2, 0, b, k),
                right: lower_bases[p].clone(),
            });
        }
        recovered.push(level);
    }

    // Leaves: block-identity probes after removing every off-diagonal level.
    let partial = partial_hodlr(n, rank, &recovered, levels, zero_leaves())?;
    let mut x = DenseMatrix::zeros(n, leaf);
    for blk in 0..(1 << levels) {
        for j in 0..leaf {
            x[(blk * leaf + j, j)] = T::one();
        }
    }
    let y = peel(oracle, &partial, levels, &x, false)?;
    let leaves = (0..1usize << levels)
        .map(|blk| y.block(blk * leaf, 0, leaf, leaf))
        .collect();

    let recovered = HodlrOperator::new(n, rank, recovered, leaves)?;
    Ok(RecoveryReport::new(recovered, oracle, start))
}

/// Zeroes every row outside the second-child ranges of blocks of size `b`.
fn second_children_only<T: Scalar>(x: &DenseMatrix<T>, b: usize) -> DenseMatrix<T> {
    DenseMatrix::from_fn(
        x.rows(),
        x.cols(),
        |i, j| if (i / b) % 2 == 1 { x[(i, j)] } else { T::zero() },
    )
}

fn partial_hodlr<T: Scalar>(
    n: usize,
    rank: usize,
    recovered: &[HodlrLevel<T>],
    levels: usize,
    leaves: Vec<DenseMatrix<T>>,
) -> Result<HodlrOperator<T>, StructuredError> {
    // Unrecovered levels are filled with zero blocks.
    let mut lv = recovered.to_vec();
    for d in recovered.len()..levels {
        let b = n >> (d + 1);
        let nodes = 1usize << d;
        lv.push(HodlrLevel {
            upper: vec![LowRankBlock::zeros(b, b, 0); nodes],
            lower: vec![LowRankBlock::zeros(b, b, 0); nodes],
        });
    }
    HodlrOperator::new(n, rank, lv, leaves)
}

/// One oracle sweep minus the already-recovered levels `1..=done`.
fn peel<T: Scalar>(
    oracle: &MatvecOracle<T>,
    partial: &HodlrOperator<T>,
    done: usize,
    x: &DenseMatrix<T>,
    transpose: bool,
) -> Result<DenseMatrix<T>, RecoveryError> {
    let mut y = if transpose {
        oracle.apply_transpose(x)?
    } else {
        oracle.apply(x)?
    };
    for j in 0..x.cols() {
        let known = partial.apply_partial(&x.column(j), transpose, done, false);
        for (i, v) in known.into_iter().enumerate() {
            y[(i, j)] = y[(i, j)] - v;
        }
    }
    Ok(y)
}

/// Orthonormal basis of width `k` for the dominant range of `sketch`, failing
/// when the energy beyond rank `k` exceeds `tolerance · ‖sketch‖_F`.
fn range_basis<T: Scalar>(
    sketch: &DenseMatrix<T>,
    k: usize,
    tolerance: T,
    level: usize,
    block: String,
) -> Result<DenseMatrix<T>, RecoveryError> {
    let svd = svd_dense(sketch)?;
    let total = sketch.frobenius_norm();
    let tail = svd.tail_norm(k);
    if total > T::zero() && tail > tolerance * total {
        return Err(RecoveryError::RankDeficit {
            level,
            block,
            rank: k,
            tail: (tail / total).to_f64_lossy(),
        });
    }
    // k <= min(b, k + p), so the thin U always has k columns.
    Ok(svd.u.leading_columns(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structured::{materialize, random_structured, StructureSpec, StructuredOperator};

    #[test]
    fn rsvd_zero_matrix_and_bad_params() {
        let oracle = MatvecOracle::new(DenseMatrix::<f64>::zeros(8, 8));
        let report = randomized_svd(&oracle, 2, 5, &mut RngStream::new(0)).unwrap();
        let dense = materialize(&StructuredOperator::LowRank(report.recovered)).unwrap();
        assert_eq!(dense.max_abs(), 0.0);
        assert!(matches!(
            randomized_svd(&oracle, 4, 5, &mut RngStream::new(0)),
            Err(RecoveryError::InvalidParameters(_))
        ));
    }

    #[test]
    fn circulant_constant_probe_is_singular() {
        let oracle = MatvecOracle::new(CirculantOperator::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let err = recover_circulant_with_probe(&oracle, &[1.0; 4], 1e-8).unwrap_err();
        assert!(matches!(err, RecoveryError::ZeroFourierMode { mode: 1, .. }));
        assert_eq!(oracle.forward_queries(), 0);
    }

    #[test]
    fn coloring_counts() {
        assert_eq!(banded_coloring(12, 2).num_colors, 5);
        assert_eq!(banded_coloring(12, 0).num_colors, 1);
        assert_eq!(banded_coloring(6, 5).num_colors, 6);
        for (n, w) in [(12, 2), (6, 5), (40, 3), (7, 0)] {
            assert!(banded_coloring(n, w).is_valid_for_bandwidth(w));
        }
        // Stride 2w is not enough.
        let tight = ColoringSchedule {
            num_colors: 4,
            color_of: (0..12).map(|j| j % 4).collect(),
        };
        assert!(!tight.is_valid_for_bandwidth(2));
    }

    #[test]
    fn banded_diagonal_one_query() {
        let d = [2.0, -1.0, 4.0, 0.5];
        let oracle = MatvecOracle::new(BandedOperator::from_diagonal(&d));
        let report = recover_banded(&oracle, 0).unwrap();
        assert_eq!(report.forward_queries, 1);
        assert_eq!(report.recovered, BandedOperator::from_diagonal(&d));
    }

    #[test]
    fn hodlr_zero_and_budget() {
        let oracle = MatvecOracle::new(DenseMatrix::<f64>::zeros(16, 16));
        let report = recover_hodlr(&oracle, 2, 2, 2, &mut RngStream::new(1)).unwrap();
        assert_eq!(
            (report.forward_queries, report.transpose_queries),
            hodlr_query_budget(16, 2, 2, 2)
        );
        let dense = materialize(&StructuredOperator::Hodlr(report.recovered)).unwrap();
        assert_eq!(dense.max_abs(), 0.0);
    }

    #[test]
    fn hodlr_rank_deficit_detected() {
        let mut s = RngStream::new(9);
        let op: StructuredOperator<f64> =
            random_structured(StructureSpec::Hodlr { levels: 2, rank: 3 }, 32, &mut s).unwrap();
        let oracle = MatvecOracle::new(op);
        let err = recover_hodlr(&oracle, 1, 2, 5, &mut s).unwrap_err();
        assert!(matches!(err, RecoveryError::RankDeficit { level: 1, .. }), "{err:?}");
    }

    #[test]
    fn hodlr_rejects_bad_shapes() {
        let oracle = MatvecOracle::new(DenseMatrix::<f64>::zeros(12, 12));
        assert!(recover_hodlr(&oracle, 1, 1, 1, &mut RngStream::new(0)).is_err());
        let oracle = MatvecOracle::new(DenseMatrix::<f64>::zeros(16, 16));
        assert!(recover_hodlr(&oracle, 0, 1, 5, &mut RngStream::new(0)).is_err());
        assert!(recover_hodlr(&oracle, 2, 5, 5, &mut RngStream::new(0)).is_err());
    }
}
