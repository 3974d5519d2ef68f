//! Structured matrix representations and the black-box matvec oracle.
//!
//! Every operator here can be applied (and transpose-applied) without forming
//! its dense matrix; [`materialize`] produces the dense form for testing and
//! residual checks.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use num_complex::Complex;
use thiserror::Error;

use crate::numerics::{gaussian_vector, DenseMatrix, FftPlan, NumericsError, RngStream};
use crate::scalar::Scalar;

/// Largest dimension [`materialize`] accepts by default.
pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructuredError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dense materialization of N = {n} exceeds the cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Square linear map exposing only products with vectors.
pub trait LinearOperator<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// `A x`. Callers guarantee `x.len() == self.dim()`.
    fn apply(&self, x: &[T]) -> Vec<T>;

    /// `Aᵀ x`.
    fn apply_transpose(&self, x: &[T]) -> Vec<T>;
}

/// `A = C R` with `C` of shape N×k and `R` of shape k×N.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankOperator<T> {
    pub left: DenseMatrix<T>,
    pub right: DenseMatrix<T>,
}

impl<T: Scalar> LowRankOperator<T> {
    pub fn new(left: DenseMatrix<T>, right: DenseMatrix<T>) -> Result<Self, StructuredError> {
        if left.cols() != right.rows() || left.rows() != right.cols() {
            return Err(StructuredError::InvalidParameters(format!(
                "factor shapes {:?} and {:?} do not form a square product",
                left.shape(),
                right.shape()
            )));
        }
        Ok(Self { left, right })
    }

    /// Number of columns of `C`, an upper bound on the rank.
    pub fn width(&self) -> usize {
        self.left.cols()
    }
}

impl<T: Scalar> LinearOperator<T> for LowRankOperator<T> {
    fn dim(&self) -> usize {
        self.left.rows()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        let inner = self.right.matvec(x).expect("checked dimension");
        self.left.matvec(&inner).expect("checked dimension")
    }

    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        let inner = self.left.transpose_matvec(x).expect("checked dimension");
        self.right.transpose_matvec(&inner).expect("checked dimension")
    }
}

/// Circulant matrix given by its first column; `A_ij = c[(i − j) mod N]`.
#[derive(Clone)]
pub struct CirculantOperator<T: Scalar> {
    column: Vec<T>,
    spectrum: Vec<Complex<T>>,
    plan: FftPlan<T>,
}

impl<T: Scalar> CirculantOperator<T> {
    pub fn new(column: Vec<T>) -> Result<Self, StructuredError> {
        let plan = FftPlan::new(column.len())?;
        let spectrum = plan.forward_real(&column);
        Ok(Self { column, spectrum, plan })
    }

    pub fn column(&self) -> &[T] {
        &self.column
    }

    /// Eigenvalues of the circulant: the DFT of its first column.
    pub fn spectrum(&self) -> &[Complex<T>] {
        &self.spectrum
    }

    fn multiply(&self, x: &[T], conjugate: bool) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.plan.forward_in_place(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b = *b * if conjugate { s.conj() } else { *s };
        }
        self.plan.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

impl<T: Scalar> fmt::Debug for CirculantOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantOperator")
            .field("column", &self.column)
            .finish()
    }
}

impl<T: Scalar> PartialEq for CirculantOperator<T> {
    fn eq(&self, other: &Self) -> bool {
        self.column == other.column
    }
}

impl<T: Scalar> LinearOperator<T> for CirculantOperator<T> {
    fn dim(&self) -> usize {
        self.column.len()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.multiply(x, false)
    }

    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        self.multiply(x, true)
    }
}

/// Banded matrix with `A_ij = 0` whenever `|i − j| > w`.
///
/// Band storage is `(2w+1) × N`: entry `(w + o, i)` holds `A[i, i + o]` for
/// offsets `o ∈ [−w, w]`; slots falling outside the matrix stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedOperator<T> {
    n: usize,
    bandwidth: usize,
    bands: DenseMatrix<T>,
}

impl<T: Scalar> BandedOperator<T> {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            bands: DenseMatrix::zeros(2 * bandwidth + 1, n),
        }
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut b = Self::zeros(d.len(), 0);
        for (i, &x) in d.iter().enumerate() {
            b.set(i, i, x);
        }
        b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i.abs_diff(j) > self.bandwidth || i >= self.n || j >= self.n {
            return T::zero();
        }
        self.bands[(self.bandwidth + j - i, i)]
    }

    /// Sets `A[i, j]`; panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        assert!(
            i < self.n && j < self.n && i.abs_diff(j) <= self.bandwidth,
            "({i}, {j}) outside band"
        );
        let slot = self.bandwidth + j - i;
        self.bands[(slot, i)] = value;
    }

    fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.bandwidth)..(i + self.bandwidth + 1).min(self.n)
    }
}

impl<T: Scalar> LinearOperator<T> for BandedOperator<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for (i, &xi) in x.iter().enumerate() {
            for j in self.row_range(i) {
                y[j] = y[j] + self.get(i, j) * xi;
            }
        }
        y
    }
}

/// Off-diagonal block stored as `left · rightᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankBlock<T> {
    pub left: DenseMatrix<T>,
    pub right: DenseMatrix<T>,
}

impl<T: Scalar> LowRankBlock<T> {
    pub fn zeros(rows: usize, cols: usize, rank: usize) -> Self {
        Self {
            left: DenseMatrix::zeros(rows, rank),
            right: DenseMatrix::zeros(cols, rank),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        self.left.matmul(&self.right.transpose()).expect("factor widths agree")
    }

    fn add_apply(&self, x: &[T], y: &mut [T]) {
        let inner = self.right.transpose_matvec(x).expect("block shape");
        for (yi, v) in y.iter_mut().zip(self.left.matvec(&inner).expect("block shape")) {
            *yi = *yi + v;
        }
    }

    fn add_apply_transpose(&self, x: &[T], y: &mut [T]) {
        let inner = self.left.transpose_matvec(x).expect("block shape");
        for (yi, v) in y.iter_mut().zip(self.right.matvec(&inner).expect("block shape")) {
            *yi = *yi + v;
        }
    }
}

/// Off-diagonal factors of the 2^(ℓ−1) nodes at one HODLR level.
#[derive(Clone, Debug, PartialEq)]
pub struct HodlrLevel<T> {
    /// `A12 = U Vᵀ` of each node, left to right.
    pub upper: Vec<LowRankBlock<T>>,
    /// `A21 = W Zᵀ` of each node, left to right.
    pub lower: Vec<LowRankBlock<T>>,
}

/// HODLR matrix with `levels` dyadic splits.
///
/// Level ℓ (1-based, stored at index ℓ−1) has 2^(ℓ−1) nodes; node `p` spans
/// indices `[2pb, 2pb + 2b)` with child size `b = N / 2^ℓ`, and its upper and
/// lower blocks couple the two children. The `2^L` dense leaves of size
/// `N / 2^L` sit on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct HodlrOperator<T> {
    n: usize,
    rank: usize,
    levels: Vec<HodlrLevel<T>>,
    leaves: Vec<DenseMatrix<T>>,
}

impl<T: Scalar> HodlrOperator<T> {
    pub fn new(
        n: usize,
        rank: usize,
        levels: Vec<HodlrLevel<T>>,
        leaves: Vec<DenseMatrix<T>>,
    ) -> Result<Self, StructuredError> {
        validate_hodlr_shape(n, levels.len())?;
        for (d, level) in levels.iter().enumerate() {
            let nodes = 1usize << d;
            let b = n >> (d + 1);
            if level.upper.len() != nodes || level.lower.len() != nodes {
                return Err(StructuredError::InvalidParameters(format!(
                    "level {} needs {nodes} nodes",
                    d + 1
                )));
            }
            for blk in level.upper.iter().chain(&level.lower) {
                if blk.left.rows() != b
                    || blk.right.rows() != b
                    || blk.left.cols() != blk.right.cols()
                    || blk.left.cols() > rank
                {
                    return Err(StructuredError::InvalidParameters(format!(
                        "level {} block factors must be {b}×(≤{rank})",
                        d + 1
                    )));
                }
            }
        }
        let leaf = n >> levels.len();
        if leaves.len() != 1 << levels.len() || leaves.iter().any(|d| d.shape() != (leaf, leaf)) {
            return Err(StructuredError::InvalidParameters(format!(
                "expected {} dense leaves of size {leaf}",
                1usize << levels.len()
            )));
        }
        Ok(Self {
            n,
            rank,
            levels,
            leaves,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn leaf_size(&self) -> usize {
        self.n >> self.levels.len()
    }

    pub fn levels(&self) -> &[HodlrLevel<T>] {
        &self.levels
    }

    pub fn leaves(&self) -> &[DenseMatrix<T>] {
        &self.leaves
    }

    /// Applies only the off-diagonal blocks of levels `1..=max_level`, plus the
    /// leaves when `include_leaves` is set.
    pub fn apply_partial(&self, x: &[T], transpose: bool, max_level: usize, include_leaves: bool) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for (d, level) in self.levels.iter().enumerate().take(max_level) {
            let b = self.n >> (d + 1);
            for p in 0..level.upper.len() {
                let r1 = 2 * p * b;
                let r2 = r1 + b;
                let (x1, x2) = (&x[r1..r2], &x[r2..r2 + b]);
                let (y1, y2) = y[r1..r2 + b].split_at_mut(b);
                if transpose {
                    level.lower[p].add_apply_transpose(x2, y1);
                    level.upper[p].add_apply_transpose(x1, y2);
                } else {
                    level.upper[p].add_apply(x2, y1);
                    level.lower[p].add_apply(x1, y2);
                }
            }
        }
        if include_leaves {
            let s = self.leaf_size();
            for (i, leaf) in self.leaves.iter().enumerate() {
                let xs = &x[i * s..(i + 1) * s];
                let v = if transpose {
                    leaf.transpose_matvec(xs)
                } else {
                    leaf.matvec(xs)
                }
                .expect("leaf shape");
                for (yi, vi) in y[i * s..(i + 1) * s].iter_mut().zip(v) {
                    *yi = *yi + vi;
                }
            }
        }
        y
    }

    fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for (d, level) in self.levels.iter().enumerate() {
            let b = self.n >> (d + 1);
            for p in 0..level.upper.len() {
                let r1 = 2 * p * b;
                m.set_block(r1, r1 + b, &level.upper[p].to_dense());
                m.set_block(r1 + b, r1, &level.lower[p].to_dense());
            }
        }
        let s = self.leaf_size();
        for (i, leaf) in self.leaves.iter().enumerate() {
            m.set_block(i * s, i * s, leaf);
        }
        m
    }
}

impl<T: Scalar> LinearOperator<T> for HodlrOperator<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.apply_partial(x, false, self.levels.len(), true)
    }

    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        self.apply_partial(x, true, self.levels.len(), true)
    }
}

/// Checks `N` is a power of two and `2^levels` divides it.
pub fn validate_hodlr_shape(n: usize, levels: usize) -> Result<(), StructuredError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(StructuredError::InvalidParameters(format!(
            "HODLR size must be a power of two, got {n}"
        )));
    }
    if levels >= usize::BITS as usize || (n >> levels) == 0 {
        return Err(StructuredError::InvalidParameters(format!(
            "2^{levels} does not divide N = {n}"
        )));
    }
    Ok(())
}

impl<T: Scalar> LinearOperator<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.matvec(x).expect("checked dimension")
    }

    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        self.transpose_matvec(x).expect("checked dimension")
    }
}

/// Tagged structured representation.
#[derive(Clone, Debug, PartialEq)]
pub enum StructuredOperator<T: Scalar> {
    LowRank(LowRankOperator<T>),
    Circulant(CirculantOperator<T>),
    Banded(BandedOperator<T>),
    Hodlr(HodlrOperator<T>),
    Dense(DenseMatrix<T>),
}

impl<T: Scalar> StructuredOperator<T> {
    fn inner(&self) -> &dyn LinearOperator<T> {
        match self {
            Self::LowRank(op) => op,
            Self::Circulant(op) => op,
            Self::Banded(op) => op,
            Self::Hodlr(op) => op,
            Self::Dense(op) => op,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::LowRank(_) => "low-rank",
            Self::Circulant(_) => "circulant",
            Self::Banded(_) => "banded",
            Self::Hodlr(_) => "hodlr",
            Self::Dense(_) => "dense",
        }
    }
}

impl<T: Scalar> LinearOperator<T> for StructuredOperator<T> {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.inner().apply(x)
    }

    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        self.inner().apply_transpose(x)
    }
}

macro_rules! impl_from_operator {
    ($($variant:ident => $ty:ty),*) => {
        $(impl<T: Scalar> From<$ty> for StructuredOperator<T> {
            fn from(op: $ty) -> Self {
                Self::$variant(op)
            }
        })*
    };
}

impl_from_operator!(
    LowRank => LowRankOperator<T>,
    Circulant => CirculantOperator<T>,
    Banded => BandedOperator<T>,
    Hodlr => HodlrOperator<T>,
    Dense => DenseMatrix<T>
);

pub fn materialize<T: Scalar>(op: &StructuredOperator<T>) -> Result<DenseMatrix<T>, StructuredError> {
    materialize_with_cap(op, DEFAULT_DENSE_CAP)
}

pub fn materialize_with_cap<T: Scalar>(
    op: &StructuredOperator<T>,
    cap: usize,
) -> Result<DenseMatrix<T>, StructuredError> {
    let n = op.dim();
    if n > cap {
        return Err(StructuredError::DenseCapExceeded { n, cap });
    }
    Ok(match op {
        StructuredOperator::LowRank(lr) => lr.left.matmul(&lr.right)?,
        StructuredOperator::Circulant(c) => DenseMatrix::from_fn(n, n, |i, j| c.column[(i + n - j) % n]),
        StructuredOperator::Banded(b) => DenseMatrix::from_fn(n, n, |i, j| b.get(i, j)),
        StructuredOperator::Hodlr(h) => h.to_dense(),
        StructuredOperator::Dense(d) => d.clone(),
    })
}

/// Operator backed by closures, for wrapping solvers or other black boxes.
pub struct FnOperator<T> {
    n: usize,
    forward: Matvec<T>,
    transpose: Matvec<T>,
}

type Matvec<T> = Box<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

impl<T: Scalar> FnOperator<T> {
    pub fn new(
        n: usize,
        forward: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
        transpose: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            forward: Box::new(forward),
            transpose: Box::new(transpose),
        }
    }
}

impl<T: Scalar> LinearOperator<T> for FnOperator<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        (self.forward)(x)
    }

    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        (self.transpose)(x)
    }
}

/// Black-box access to a matrix through `x ↦ Ax` and `x ↦ Aᵀx` only, counting
/// every column it is asked to multiply.
pub struct MatvecOracle<T: Scalar> {
    op: Arc<dyn LinearOperator<T>>,
    forward: AtomicUsize,
    transpose: AtomicUsize,
}

impl<T: Scalar> MatvecOracle<T> {
    pub fn new(op: impl LinearOperator<T> + 'static) -> Self {
        Self::from_arc(Arc::new(op))
    }

    pub fn from_arc(op: Arc<dyn LinearOperator<T>>) -> Self {
        Self {
            op,
            forward: AtomicUsize::new(0),
            transpose: AtomicUsize::new(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn forward_queries(&self) -> usize {
        self.forward.load(Ordering::SeqCst)
    }

    pub fn transpose_queries(&self) -> usize {
        self.transpose.load(Ordering::SeqCst)
    }

    /// `A X`; the forward counter grows by `cols(X)`.
    pub fn apply(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>, StructuredError> {
        self.probe(x, false)
    }

    /// `Aᵀ X`; the transpose counter grows by `cols(X)`.
    pub fn apply_transpose(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>, StructuredError> {
        self.probe(x, true)
    }

    pub fn apply_vector(&self, x: &[T]) -> Result<Vec<T>, StructuredError> {
        let m = DenseMatrix::from_row_major(x.len(), 1, x.to_vec())?;
        Ok(self.apply(&m)?.into_vec())
    }

    fn probe(&self, x: &DenseMatrix<T>, transpose: bool) -> Result<DenseMatrix<T>, StructuredError> {
        let n = self.dim();
        if x.rows() != n {
            return Err(StructuredError::DimensionMismatch {
                expected: n,
                found: x.rows(),
            });
        }
        let mut out = DenseMatrix::zeros(n, x.cols());
        for j in 0..x.cols() {
            let col = x.column(j);
            let y = if transpose {
                self.op.apply_transpose(&col)
            } else {
                self.op.apply(&col)
            };
            out.set_column(j, &y);
        }
        let counter = if transpose { &self.transpose } else { &self.forward };
        counter.fetch_add(x.cols(), Ordering::SeqCst);
        Ok(out)
    }
}

impl<T: Scalar> fmt::Debug for MatvecOracle<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatvecOracle")
            .field("dim", &self.dim())
            .field("forward_queries", &self.forward_queries())
            .field("transpose_queries", &self.transpose_queries())
            .finish()
    }
}

/// Kind and parameters of a random structured test instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureSpec {
    LowRank { rank: usize },
    Circulant,
    Banded { bandwidth: usize },
    Hodlr { levels: usize, rank: usize },
    Dense,
}

/// Random instance of the requested structure with i.i.d. standard normal free
/// parameters, deterministic in the stream's state.
pub fn random_structured<T: Scalar>(
    spec: StructureSpec,
    n: usize,
    stream: &mut RngStream,
) -> Result<StructuredOperator<T>, StructuredError> {
    if n == 0 {
        return Err(StructuredError::InvalidParameters("N must be positive".into()));
    }
    let mut gaussian_matrix = |r: usize, c: usize| DenseMatrix::from_row_major(r, c, gaussian_vector(stream, r * c));
    Ok(match spec {
        StructureSpec::LowRank { rank } => {
            if rank == 0 || rank >= n {
                return Err(StructuredError::InvalidParameters(format!(
                    "low-rank instance needs 0 < k < N, got k = {rank}, N = {n}"
                )));
            }
            let left = gaussian_matrix(n, rank)?;
            let right = gaussian_matrix(rank, n)?;
            LowRankOperator::new(left, right)?.into()
        }
        StructureSpec::Circulant => CirculantOperator::new(gaussian_vector(stream, n))?.into(),
        StructureSpec::Banded { bandwidth } => {
            if bandwidth >= n {
                return Err(StructuredError::InvalidParameters(format!(
                    "bandwidth {bandwidth} must be below N = {n}"
                )));
            }
            let mut b = BandedOperator::zeros(n, bandwidth);
            for i in 0..n {
                for j in b.row_range(i) {
                    b.set(i, j, T::lit(stream.standard_normal()));
                }
            }
            b.into()
        }
        StructureSpec::Hodlr { levels, rank } => {
            validate_hodlr_shape(n, levels)?;
            if rank == 0 {
                return Err(StructuredError::InvalidParameters("HODLR rank must be positive".into()));
            }
            let mut lv = Vec::with_capacity(levels);
            for d in 0..levels {
                let b = n >> (d + 1);
                let k = rank.min(b);
                let mut block = || -> Result<LowRankBlock<T>, StructuredError> {
                    Ok(LowRankBlock {
                        left: gaussian_matrix(b, k)?,
                        right: gaussian_matrix(b, k)?,
                    })
                };
                let mut upper = Vec::new();
                let mut lower = Vec::new();
                for _ in 0..1usize << d {
                    upper.push(block()?);
                    lower.push(block()?);
                }
                lv.push(HodlrLevel { upper, lower });
            }
            let s = n >> levels;
            let leaves = (0..1usize << levels)
                .map(|_| gaussian_matrix(s, s))
                .collect::<Result<Vec<_>, _>>()?;
            HodlrOperator::new(n, rank, lv, leaves)?.into()
        }
        StructureSpec::Dense => gaussian_matrix(n, n)?.into(),
    })
}
