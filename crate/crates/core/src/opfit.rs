//! Linear operator models fitted from input/output pairs.
//!
//! Grid-kernel models act by quadrature, `u(x) = Σ_y G(x, y) w_y f(y)`, with
//! trapezoid (or uniform periodic) weights `w`. The Fourier multiplier acts on
//! the normalized Fourier coefficients and is therefore resolution independent.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{svd_dense, DenseMatrix, FftPlan, NumericsError, RidgeSolver};
use crate::pdelab::OperatorDataset;
use crate::sample::{FunctionSample, Grid, SampleError};

/// Ridge scale used when none is given: `λ = 1e−8 · ‖D‖_F² / m`.
pub const DEFAULT_RIDGE_FACTOR: f64 = 1e-8;
/// A Fourier mode counts as excited when its input power exceeds this
/// fraction of the strongest mode's power.
pub const EXCITATION_TOLERANCE: f64 = 1e-24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("dataset has no usable pairs")]
    EmptyDataset,
    #[error("model needs a {expected} grid, got {found:?}")]
    UnsupportedGrid { expected: &'static str, found: Grid },
    #[error("sample grid {found:?} does not match the model grid {expected:?}")]
    GridMismatch { expected: Grid, found: Grid },
    #[error("rank {rank} exceeds the grid size {size}")]
    RankTooLarge { rank: usize, size: usize },
    #[error("grid size {size} is not divisible by 2^{levels}")]
    Divisibility { size: usize, levels: usize },
    #[error("target {index} has zero norm; relative loss undefined")]
    ZeroTarget { index: usize },
    #[error("{predictions} predictions for {targets} targets")]
    CountMismatch { predictions: usize, targets: usize },
    #[error("evaluation resolution {resolution} is below the training resolution {training}")]
    ResolutionBelowTraining { resolution: usize, training: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// `G ∈ ℝ^{m×m}` sampled on the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseKernel {
    pub grid: Grid,
    pub kernel: DenseMatrix<f64>,
}

/// `G = left · rightᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankKernel {
    pub grid: Grid,
    pub left: DenseMatrix<f64>,
    pub right: DenseMatrix<f64>,
}

/// `u = F⁻¹(R · F f)` with `R` supported on `|j| ≤ k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierMultiplier {
    /// Period of the domain.
    pub length: f64,
    pub training_resolution: usize,
    pub k_max: usize,
    /// `R_j` at index `j + k_max`, for `j = −k_max..=k_max`.
    pub multiplier: Vec<Complex64>,
    /// Nonnegative modes that were never excited by the training inputs;
    /// their multiplier is zero.
    pub unexcited: Vec<usize>,
}

impl FourierMultiplier {
    pub fn coefficient(&self, j: i64) -> Complex64 {
        if j.unsigned_abs() as usize > self.k_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.multiplier[(j + self.k_max as i64) as usize]
        }
    }
}

/// Grid kernel with entries for `|x − y| > radius` set to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedKernel {
    pub grid: Grid,
    pub radius: f64,
    pub kernel: DenseMatrix<f64>,
    /// `‖G − G_r‖_{L²}` under the tensor trapezoid rule.
    pub truncation_error: f64,
}

/// Rank-`k` factorization of one admissible block.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleBlock {
    pub level: usize,
    pub row_start: usize,
    pub col_start: usize,
    pub size: usize,
    pub left: DenseMatrix<f64>,
    pub right: DenseMatrix<f64>,
    /// Frobenius norm of the discarded singular values.
    pub tail: f64,
}

/// Dense near-diagonal block at the finest level.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLeaf {
    pub row_start: usize,
    pub col_start: usize,
    pub block: DenseMatrix<f64>,
}

/// `G ≈ K_1 + … + K_L + leaves`, each `K_l` a sum of rank-`k` admissible blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalKernel {
    pub grid: Grid,
    pub levels: usize,
    pub rank: usize,
    pub blocks: Vec<AdmissibleBlock>,
    pub leaves: Vec<DenseLeaf>,
}

impl HierarchicalKernel {
    /// `K_l` as a dense matrix.
    pub fn level_kernel(&self, level: usize) -> DenseMatrix<f64> {
        let m = self.grid.len();
        let mut out = DenseMatrix::zeros(m, m);
        for b in self.blocks.iter().filter(|b| b.level == level) {
            let dense = b.left.matmul(&b.right.transpose()).expect("factor shapes agree");
            out.set_block(b.row_start, b.col_start, &dense);
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix<f64> {
        let m = self.grid.len();
        let mut out = DenseMatrix::zeros(m, m);
        for b in &self.blocks {
            let dense = b.left.matmul(&b.right.transpose()).expect("factor shapes agree");
            out.set_block(b.row_start, b.col_start, &dense);
        }
        for leaf in &self.leaves {
            out.set_block(leaf.row_start, leaf.col_start, &leaf.block);
        }
        out
    }

    /// Frobenius reconstruction error implied by the block tails,
    /// `(Σ tail²)^{1/2}`; blocks are disjoint so this is exact.
    pub fn reported_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.tail * b.tail).sum::<f64>().sqrt()
    }

    /// `Σ tail`, an upper bound on the reconstruction error.
    pub fn tail_sum(&self) -> f64 {
        self.blocks.iter().map(|b| b.tail).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelModel {
    Dense(DenseKernel),
    LowRank(LowRankKernel),
    FourierMultiplier(FourierMultiplier),
    Banded(BandedKernel),
    Hierarchical(HierarchicalKernel),
}

impl KernelModel {
    pub fn variant_name(&self) -> &'static str {
        match self {
            KernelModel::Dense(_) => "dense-kernel",
            KernelModel::LowRank(_) => "low-rank",
            KernelModel::FourierMultiplier(_) => "fourier-multiplier",
            KernelModel::Banded(_) => "banded",
            KernelModel::Hierarchical(_) => "hierarchical",
        }
    }

    /// Grid the model was fitted on.
    pub fn grid(&self) -> Grid {
        match self {
            KernelModel::Dense(k) => k.grid.clone(),
            KernelModel::LowRank(k) => k.grid.clone(),
            KernelModel::Banded(k) => k.grid.clone(),
            KernelModel::Hierarchical(k) => k.grid.clone(),
            KernelModel::FourierMultiplier(k) => Grid::Periodic {
                length: k.length,
                points: k.training_resolution,
            },
        }
    }

    /// Grid kernel `G` for the quadrature-based variants.
    pub fn kernel_matrix(&self) -> Option<DenseMatrix<f64>> {
        match self {
            KernelModel::Dense(k) => Some(k.kernel.clone()),
            KernelModel::LowRank(k) => Some(k.left.matmul(&k.right.transpose()).expect("factor shapes agree")),
            KernelModel::Banded(k) => Some(k.kernel.clone()),
            KernelModel::Hierarchical(k) => Some(k.reconstruct()),
            KernelModel::FourierMultiplier(_) => None,
        }
    }
}

impl fmt::Display for KernelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} on {:?}", self.variant_name(), self.grid())
    }
}

fn require_1d(grid: &Grid) -> Result<(), FitError> {
    if grid.dimension() != 1 {
        return Err(FitError::UnsupportedGrid {
            expected: "one-dimensional",
            found: grid.clone(),
        });
    }
    Ok(())
}

/// Indices of pairs with a nonzero target norm; the rest are skipped with a warning.
fn usable_pairs(ds: &OperatorDataset) -> Vec<usize> {
    (0..ds.len())
        .filter(|&i| {
            let ok = ds.outputs[i].l2_norm() > 0.0;
            if !ok {
                log::warn!("excluding pair {i}: zero-norm target makes the relative weight undefined");
            }
            ok
        })
        .collect()
}

/// Result of the dense kernel regression.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenFit {
    pub model: KernelModel,
    pub ridge: f64,
    /// Pairs skipped because their target has zero norm.
    pub excluded: Vec<usize>,
    /// Numerical rank of the weighted probe matrix.
    pub effective_rank: usize,
}

/// Minimizes
/// `(1/M) Σ_i ‖u_i − ∫G(·,y) f_i(y)dy‖² / ‖u_i‖² + λ‖G‖²_{L²(Ω×Ω)}`
/// over grid kernels, all integrals by trapezoid quadrature.
///
/// The objective separates over output nodes `x`: with `h = W^{1/2} G(x,·)`,
/// each row solves `min ‖D h − b_x‖² + λ‖h‖²` against the same matrix
/// `D_i = (α_i/M)^{1/2} (W^{1/2} f_i)ᵀ`, `α_i = 1/‖u_i‖²`.
pub fn fit_green_kernel(ds: &OperatorDataset, ridge: Option<f64>) -> Result<GreenFit, FitError> {
    let grid = ds.grid();
    require_1d(&grid)?;
    let used = usable_pairs(ds);
    if used.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    let m = grid.len();
    let count = used.len() as f64;
    let w = grid.weights();
    let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let alpha: Vec<f64> = used
        .iter()
        .map(|&i| 1.0 / (count * ds.outputs[i].l2_norm().powi(2)))
        .collect();
    let d = DenseMatrix::from_fn(used.len(), m, |r, y| {
        alpha[r].sqrt() * sqrt_w[y] * ds.inputs[used[r]].values[y]
    });
    let ridge = match ridge {
        Some(l) if l < 0.0 || !l.is_finite() => {
            return Err(FitError::InvalidParameter(format!(
                "ridge must be nonnegative, got {l}"
            )))
        }
        Some(l) => l,
        None => DEFAULT_RIDGE_FACTOR * d.frobenius_norm().powi(2) / m as f64,
    };
    let solver = RidgeSolver::new(&d)?;
    let rows: Vec<(Vec<f64>, usize)> = (0..m)
        .into_par_iter()
        .map(|x| {
            let b: Vec<f64> = used
                .iter()
                .zip(&alpha)
                .map(|(&i, a)| a.sqrt() * ds.outputs[i].values[x])
                .collect();
            let sol = solver.solve(&b, ridge)?;
            let g = sol.x.iter().zip(&sqrt_w).map(|(h, s)| h / s).collect();
            Ok((g, sol.effective_rank))
        })
        .collect::<Result<_, NumericsError>>()?;
    let effective_rank = rows.first().map_or(0, |r| r.1);
    let kernel = DenseMatrix::from_rows(&rows.into_iter().map(|r| r.0).collect::<Vec<_>>())?;
    Ok(GreenFit {
        model: KernelModel::Dense(DenseKernel { grid, kernel }),
        ridge,
        excluded: (0..ds.len()).filter(|i| !used.contains(i)).collect(),
        effective_rank,
    })
}

/// Value of the regression objective of [`fit_green_kernel`] at `kernel`.
pub fn green_objective(kernel: &DenseMatrix<f64>, ds: &OperatorDataset, ridge: f64) -> Result<f64, FitError> {
    let grid = ds.grid();
    let used = usable_pairs(ds);
    if used.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    let w = grid.weights();
    let mut misfit = 0.0;
    for &i in &used {
        let wf: Vec<f64> = ds.inputs[i].values.iter().zip(&w).map(|(f, w)| f * w).collect();
        let pred = kernel.matvec(&wf)?;
        let diff: f64 = pred
            .iter()
            .zip(&ds.outputs[i].values)
            .zip(&w)
            .map(|((p, u), w)| w * (p - u).powi(2))
            .sum();
        misfit += diff / ds.outputs[i].l2_norm().powi(2);
    }
    let mut penalty = 0.0;
    for x in 0..kernel.rows() {
        for (y, g) in kernel.row(x).iter().enumerate() {
            penalty += w[x] * w[y] * g * g;
        }
    }
    Ok(misfit / used.len() as f64 + ridge * penalty)
}

/// Best rank-`p` approximation of a grid kernel in `L²(Ω×Ω)`.
pub fn low_rank_truncate(model: &DenseKernel, p: usize) -> Result<LowRankKernel, FitError> {
    let m = model.kernel.rows();
    if p > m {
        return Err(FitError::RankTooLarge { rank: p, size: m });
    }
    let sqrt_w: Vec<f64> = model.grid.weights().iter().map(|w| w.sqrt()).collect();
    let weighted = DenseMatrix::from_fn(m, m, |i, j| sqrt_w[i] * model.kernel[(i, j)] * sqrt_w[j]);
    let svd = svd_dense(&weighted)?;
    let left = DenseMatrix::from_fn(m, p, |i, l| svd.u[(i, l)] * svd.singular_values[l] / sqrt_w[i]);
    let right = DenseMatrix::from_fn(m, p, |j, l| svd.v[(j, l)] / sqrt_w[j]);
    Ok(LowRankKernel {
        grid: model.grid.clone(),
        left,
        right,
    })
}

/// Dense fit followed by rank-`p` truncation.
pub fn fit_low_rank(ds: &OperatorDataset, p: usize, ridge: Option<f64>) -> Result<KernelModel, FitError> {
    let m = ds.grid().len();
    if p > m {
        return Err(FitError::RankTooLarge { rank: p, size: m });
    }
    let KernelModel::Dense(dense) = fit_green_kernel(ds, ridge)?.model else {
        unreachable!("dense fit returns a dense kernel")
    };
    Ok(KernelModel::LowRank(low_rank_truncate(&dense, p)?))
}

fn periodic_grid(grid: &Grid) -> Result<(f64, usize), FitError> {
    match *grid {
        Grid::Periodic { length, points } => Ok((length, points)),
        _ => Err(FitError::UnsupportedGrid {
            expected: "periodic one-dimensional",
            found: grid.clone(),
        }),
    }
}

/// Per-mode ridge least squares
/// `R_j = Σ_i conj(f̂_ij) û_ij / (Σ_i |f̂_ij|² + λ)` for `|j| ≤ k_max`.
pub fn fit_fourier_multiplier(ds: &OperatorDataset, k_max: usize, ridge: f64) -> Result<KernelModel, FitError> {
    let grid = ds.grid();
    let (length, s) = periodic_grid(&grid)?;
    if 2 * k_max >= s {
        return Err(FitError::InvalidParameter(format!(
            "k_max = {k_max} needs more than {} points, grid has {s}",
            2 * k_max
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(FitError::InvalidParameter(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    if ds.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    let plan = FftPlan::<f64>::new(s)?;
    let norm = 1.0 / s as f64;
    let spectra: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let f = plan.forward_real(&ds.inputs[i].values);
            let u = plan.forward_real(&ds.outputs[i].values);
            (
                f[..=k_max].iter().map(|z| z * norm).collect(),
                u[..=k_max].iter().map(|z| z * norm).collect(),
            )
        })
        .collect();
    let power: Vec<f64> = (0..=k_max)
        .map(|j| spectra.iter().map(|(f, _)| f[j].norm_sqr()).sum())
        .collect();
    let strongest = power.iter().cloned().fold(0.0, f64::max);
    let mut unexcited = Vec::new();
    let positive: Vec<Complex64> = (0..=k_max)
        .map(|j| {
            if power[j] <= EXCITATION_TOLERANCE * strongest || power[j] == 0.0 {
                unexcited.push(j);
                return Complex64::new(0.0, 0.0);
            }
            let num: Complex64 = spectra.iter().map(|(f, u)| f[j].conj() * u[j]).sum();
            let r = num / (power[j] + ridge);
            if j == 0 {
                Complex64::new(r.re, 0.0)
            } else {
                r
            }
        })
        .collect();
    if !unexcited.is_empty() {
        log::warn!("fourier modes {unexcited:?} were never excited; multiplier set to zero");
    }
    let multiplier = (-(k_max as i64)..=k_max as i64)
        .map(|j| {
            let r = positive[j.unsigned_abs() as usize];
            if j < 0 {
                r.conj()
            } else {
                r
            }
        })
        .collect();
    Ok(KernelModel::FourierMultiplier(FourierMultiplier {
        length,
        training_resolution: s,
        k_max,
        multiplier,
        unexcited,
    }))
}

/// `‖G‖_{L²}` on the grid by the tensor trapezoid rule.
pub fn kernel_l2_norm(kernel: &DenseMatrix<f64>, grid: &Grid) -> f64 {
    let w = grid.weights();
    let mut sum = 0.0;
    for x in 0..kernel.rows() {
        for (y, g) in kernel.row(x).iter().enumerate() {
            sum += w[x] * w[y] * g * g;
        }
    }
    sum.sqrt()
}

/// `G_r(x, y) = G(x, y)` for `|x − y| ≤ r`, zero otherwise.
pub fn truncate_band(model: &DenseKernel, radius: f64) -> Result<BandedKernel, FitError> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(FitError::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    require_1d(&model.grid)?;
    let axis = model.grid.axis();
    let m = axis.len();
    let outside = |i: usize, j: usize| (axis[i] - axis[j]).abs() > radius;
    let kernel = DenseMatrix::from_fn(m, m, |i, j| if outside(i, j) { 0.0 } else { model.kernel[(i, j)] });
    let removed = DenseMatrix::from_fn(m, m, |i, j| if outside(i, j) { model.kernel[(i, j)] } else { 0.0 });
    Ok(BandedKernel {
        grid: model.grid.clone(),
        radius,
        kernel,
        truncation_error: kernel_l2_norm(&removed, &model.grid),
    })
}

/// Dyadic block decomposition of a grid kernel.
///
/// Level `l` splits the index range into `2^l` blocks. A block pair is
/// admissible when the two index ranges are separated by at least one block
/// (`|I − J| ≥ 2`); it is then compressed to rank `k` and not refined further.
/// Inadmissible pairs are refined, and those left at level `L` are stored dense.
pub fn hierarchical_decompose(model: &DenseKernel, levels: usize, rank: usize) -> Result<HierarchicalKernel, FitError> {
    require_1d(&model.grid)?;
    let m = model.kernel.rows();
    if levels == 0 || levels >= usize::BITS as usize || !m.is_multiple_of(1 << levels) {
        return Err(FitError::Divisibility { size: m, levels });
    }
    let mut blocks = Vec::new();
    let mut leaves = Vec::new();
    // Inadmissible block pairs awaiting refinement, as block indices at the current level.
    let mut pending = vec![(0usize, 0usize)];
    for level in 1..=levels {
        let size = m >> level;
        let mut next = Vec::new();
        let children: Vec<(usize, usize)> = pending
            .iter()
            .flat_map(|&(bi, bj)| {
                [
                    (2 * bi, 2 * bj),
                    (2 * bi, 2 * bj + 1),
                    (2 * bi + 1, 2 * bj),
                    (2 * bi + 1, 2 * bj + 1),
                ]
            })
            .collect();
        for (bi, bj) in children {
            if bi.abs_diff(bj) >= 2 {
                let block = model.kernel.block(bi * size, bj * size, size, size);
                let svd = svd_dense(&block)?;
                let k = rank.min(size);
                let left = DenseMatrix::from_fn(size, k, |i, l| svd.u[(i, l)] * svd.singular_values[l]);
                let right = svd.v.leading_columns(k);
                blocks.push(AdmissibleBlock {
                    level,
                    row_start: bi * size,
                    col_start: bj * size,
                    size,
                    left,
                    right,
                    tail: svd.tail_norm(k),
                });
            } else if level == levels {
                leaves.push(DenseLeaf {
                    row_start: bi * size,
                    col_start: bj * size,
                    block: model.kernel.block(bi * size, bj * size, size, size),
                });
            } else {
                next.push((bi, bj));
            }
        }
        pending = next;
    }
    Ok(HierarchicalKernel {
        grid: model.grid.clone(),
        levels,
        rank,
        blocks,
        leaves,
    })
}

fn apply_multiplier(model: &FourierMultiplier, f: &FunctionSample) -> Result<FunctionSample, FitError> {
    let (length, s) = periodic_grid(&f.grid)?;
    if (length - model.length).abs() > 1e-12 * model.length {
        return Err(FitError::GridMismatch {
            expected: Grid::Periodic {
                length: model.length,
                points: s,
            },
            found: f.grid.clone(),
        });
    }
    if 2 * model.k_max >= s {
        return Err(FitError::ResolutionBelowTraining {
            resolution: s,
            training: model.training_resolution,
        });
    }
    let plan = FftPlan::<f64>::new(s)?;
    let spectrum = plan.forward_real(&f.values);
    let mut out = vec![Complex64::new(0.0, 0.0); s];
    for j in 0..=model.k_max {
        out[j] = model.coefficient(j as i64) * spectrum[j];
        if j > 0 {
            out[s - j] = model.coefficient(-(j as i64)) * spectrum[s - j];
        }
    }
    Ok(FunctionSample::new(f.grid.clone(), plan.inverse_real(&out))?)
}

/// `A(f) = ∫ G(·, y) f(y) dy` by quadrature, or the Fourier multiplier at any
/// resolution that resolves its modes.
pub fn predict(model: &KernelModel, f: &FunctionSample) -> Result<FunctionSample, FitError> {
    if let KernelModel::FourierMultiplier(fm) = model {
        return apply_multiplier(fm, f);
    }
    let grid = model.grid();
    if f.grid != grid {
        return Err(FitError::GridMismatch {
            expected: grid,
            found: f.grid.clone(),
        });
    }
    let wf: Vec<f64> = f.values.iter().zip(grid.weights()).map(|(v, w)| v * w).collect();
    let values = match model {
        KernelModel::Dense(k) => k.kernel.matvec(&wf)?,
        KernelModel::Banded(k) => k.kernel.matvec(&wf)?,
        KernelModel::LowRank(k) => k.left.matvec(&k.right.transpose_matvec(&wf)?)?,
        KernelModel::Hierarchical(h) => {
            let mut out = vec![0.0; wf.len()];
            for b in &h.blocks {
                let coeffs = b.right.transpose_matvec(&wf[b.col_start..b.col_start + b.size])?;
                for (o, v) in out[b.row_start..].iter_mut().zip(b.left.matvec(&coeffs)?) {
                    *o += v;
                }
            }
            for leaf in &h.leaves {
                let n = leaf.block.cols();
                let part = leaf.block.matvec(&wf[leaf.col_start..leaf.col_start + n])?;
                for (o, v) in out[leaf.row_start..].iter_mut().zip(part) {
                    *o += v;
                }
            }
            out
        }
        KernelModel::FourierMultiplier(_) => unreachable!("handled above"),
    };
    Ok(FunctionSample::new(grid, values)?)
}

/// The discrete operator `f ↦ predict(f)` on the model's grid as a matrix.
pub fn materialize(model: &KernelModel) -> Result<DenseMatrix<f64>, FitError> {
    let grid = model.grid();
    let n = grid.len();
    let columns = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            predict(model, &FunctionSample::new(grid.clone(), e)?).map(|u| u.values)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DenseMatrix::from_columns(n, &columns))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `(1/N) Σ_i (1/m) Σ_j |Â(f_i)(x_j) − u_i(x_j)|²`.
    Mse,
    /// `(1/N) Σ_i ‖Â(f_i) − u_i‖²/‖u_i‖²`.
    RelativeSquaredL2,
    /// `(1/N) Σ_i ‖Â(f_i) − u_i‖/‖u_i‖`.
    RelativeL2,
    /// `(1/N) Σ_i ‖Â(f_i) − u_i‖_{L¹}/‖u_i‖_{L¹}`.
    RelativeL1,
    /// `(1/N) Σ_i |Â(f_i) − u_i|_{H¹}/|u_i|_{H¹}`.
    H1SeminormRelative,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Mse,
        LossKind::RelativeSquaredL2,
        LossKind::RelativeL2,
        LossKind::RelativeL1,
        LossKind::H1SeminormRelative,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::RelativeSquaredL2 => "relative-squared-l2",
            LossKind::RelativeL2 => "relative-l2",
            LossKind::RelativeL1 => "relative-l1",
            LossKind::H1SeminormRelative => "h1-seminorm-relative",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn l1_norm(values: &[f64], w: &[f64]) -> f64 {
    values.iter().zip(w).map(|(v, w)| w * v.abs()).sum()
}

fn l2_norm(values: &[f64], w: &[f64]) -> f64 {
    values.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
}

/// Finite-difference derivative along one axis: centered in the interior,
/// one-sided at boundaries, wrapped on periodic grids.
fn axis_derivative(values: &[f64], n: usize, h: f64, periodic: bool, at: impl Fn(usize) -> usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let v = |k: usize| values[at(k)];
            if periodic {
                (v((i + 1) % n) - v((i + n - 1) % n)) / (2.0 * h)
            } else if i == 0 {
                (v(1) - v(0)) / h
            } else if i == n - 1 {
                (v(n - 1) - v(n - 2)) / h
            } else {
                (v(i + 1) - v(i - 1)) / (2.0 * h)
            }
        })
        .collect()
}

/// `|v|_{H¹} = ‖∇v‖_{L²}` with finite-difference gradients.
pub fn h1_seminorm(sample: &FunctionSample) -> f64 {
    let grid = &sample.grid;
    let n = grid.resolution();
    let h = grid.spacing();
    let periodic = grid.is_periodic();
    let w = grid.weights();
    if grid.dimension() == 1 {
        let d = axis_derivative(&sample.values, n, h, periodic, |k| k);
        return l2_norm(&d, &w);
    }
    let mut grad2 = vec![0.0; n * n];
    for i in 0..n {
        let dx = axis_derivative(&sample.values, n, h, periodic, |k| i * n + k);
        let dy = axis_derivative(&sample.values, n, h, periodic, |k| k * n + i);
        for k in 0..n {
            grad2[i * n + k] += dx[k] * dx[k];
            grad2[k * n + i] += dy[k] * dy[k];
        }
    }
    grad2.iter().zip(&w).map(|(g, w)| g * w).sum::<f64>().sqrt()
}

/// Per-pair loss terms; [`compute_loss`] is their mean.
pub fn loss_terms(
    kind: LossKind,
    predictions: &[FunctionSample],
    targets: &[FunctionSample],
) -> Result<Vec<f64>, FitError> {
    if predictions.len() != targets.len() {
        return Err(FitError::CountMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    predictions
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(index, (p, u))| {
            if p.grid != u.grid {
                return Err(FitError::GridMismatch {
                    expected: u.grid.clone(),
                    found: p.grid.clone(),
                });
            }
            let w = u.grid.weights();
            let diff = p.combine(1.0, u, -1.0);
            let ratio = |num: f64, den: f64| {
                if den > 0.0 {
                    Ok(num / den)
                } else {
                    Err(FitError::ZeroTarget { index })
                }
            };
            match kind {
                LossKind::Mse => Ok(diff.values.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64),
                LossKind::RelativeSquaredL2 => ratio(l2_norm(&diff.values, &w).powi(2), l2_norm(&u.values, &w).powi(2)),
                LossKind::RelativeL2 => ratio(l2_norm(&diff.values, &w), l2_norm(&u.values, &w)),
                LossKind::RelativeL1 => ratio(l1_norm(&diff.values, &w), l1_norm(&u.values, &w)),
                LossKind::H1SeminormRelative => ratio(h1_seminorm(&diff), h1_seminorm(u)),
            }
        })
        .collect()
}

/// Dataset average of the per-pair loss.
pub fn compute_loss(
    kind: LossKind,
    predictions: &[FunctionSample],
    targets: &[FunctionSample],
) -> Result<f64, FitError> {
    let terms = loss_terms(kind, predictions, targets)?;
    if terms.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Predictions of `model` on every input of `ds`.
pub fn predict_dataset(model: &KernelModel, ds: &OperatorDataset) -> Result<Vec<FunctionSample>, FitError> {
    ds.inputs.par_iter().map(|f| predict(model, f)).collect()
}

/// One row of a super-resolution table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionError {
    pub resolution: usize,
    pub relative_l2: f64,
    pub pairs: usize,
}

/// Relative L² error of a Fourier multiplier on test sets at resolutions at
/// or above its training resolution.
pub fn evaluate_super_resolution(
    model: &KernelModel,
    tests: &[OperatorDataset],
) -> Result<Vec<ResolutionError>, FitError> {
    let KernelModel::FourierMultiplier(fm) = model else {
        return Err(FitError::InvalidParameter(format!(
            "super-resolution needs a fourier-multiplier model, got {}",
            model.variant_name()
        )));
    };
    tests
        .iter()
        .map(|ds| {
            let (_, s) = periodic_grid(&ds.grid())?;
            if s < fm.training_resolution {
                return Err(FitError::ResolutionBelowTraining {
                    resolution: s,
                    training: fm.training_resolution,
                });
            }
            let predictions = predict_dataset(model, ds)?;
            Ok(ResolutionError {
                resolution: s,
                relative_l2: compute_loss(LossKind::RelativeL2, &predictions, &ds.outputs)?,
                pairs: ds.len(),
            })
        })
        .collect()
}
