//! Grid-discretized functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{periodic_weights, trapezoid_weights};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("grid has {expected} points but {found} values were given")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Uniform sampling grid.
///
/// Two-dimensional grids store values row-major with the first coordinate
/// varying fastest within a row: index `i·n + j` is the point `(x_j, x_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Grid {
    /// `points` nodes on `[start, end]`, endpoints included.
    Interval { start: f64, end: f64, points: usize },
    /// `points` nodes `x_i = i·length/points` on the periodic interval `[0, length)`.
    Periodic { length: f64, points: usize },
    /// `points × points` nodes on `[0,1]²`, boundary included.
    Square { points: usize },
    /// `points × points` nodes on the periodic square `[0, length)²`.
    PeriodicSquare { length: f64, points: usize },
}

impl Grid {
    pub fn unit_interval(points: usize) -> Self {
        Self::Interval {
            start: 0.0,
            end: 1.0,
            points,
        }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        let ok = match *self {
            Self::Interval { start, end, points } => end > start && start.is_finite() && end.is_finite() && points >= 2,
            Self::Periodic { length, points } | Self::PeriodicSquare { length, points } => {
                length > 0.0 && length.is_finite() && points >= 1
            }
            Self::Square { points } => points >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(SampleError::InvalidGrid(format!("{self:?}")))
        }
    }

    /// Points per axis.
    pub fn resolution(&self) -> usize {
        match *self {
            Self::Interval { points, .. }
            | Self::Periodic { points, .. }
            | Self::Square { points }
            | Self::PeriodicSquare { points, .. } => points,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Interval { .. } | Self::Periodic { .. } => 1,
            Self::Square { .. } | Self::PeriodicSquare { .. } => 2,
        }
    }

    pub fn len(&self) -> usize {
        self.resolution().pow(self.dimension() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Self::Periodic { .. } | Self::PeriodicSquare { .. })
    }

    /// Domain length along one axis.
    pub fn extent(&self) -> f64 {
        match *self {
            Self::Interval { start, end, .. } => end - start,
            Self::Periodic { length, .. } | Self::PeriodicSquare { length, .. } => length,
            Self::Square { .. } => 1.0,
        }
    }

    pub fn spacing(&self) -> f64 {
        let n = self.resolution() as f64;
        if self.is_periodic() {
            self.extent() / n
        } else {
            self.extent() / (n - 1.0)
        }
    }

    /// Node coordinates along one axis.
    pub fn axis(&self) -> Vec<f64> {
        let n = self.resolution();
        let h = self.spacing();
        let start = match *self {
            Self::Interval { start, .. } => start,
            _ => 0.0,
        };
        (0..n)
            .map(|i| {
                if i + 1 == n && !self.is_periodic() {
                    start + self.extent()
                } else {
                    start + i as f64 * h
                }
            })
            .collect()
    }

    /// Quadrature weights along one axis: trapezoid, or uniform when periodic.
    pub fn axis_weights(&self) -> Vec<f64> {
        if self.is_periodic() {
            periodic_weights(self.resolution(), self.extent())
        } else {
            trapezoid_weights(&self.axis()).expect("validated grid is increasing")
        }
    }

    /// Quadrature weights for every grid value (tensor products in 2D).
    pub fn weights(&self) -> Vec<f64> {
        let w = self.axis_weights();
        if self.dimension() == 1 {
            return w;
        }
        let mut out = Vec::with_capacity(self.len());
        for wi in &w {
            for wj in &w {
                out.push(wi * wj);
            }
        }
        out
    }
}

/// Values of a function on a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSample {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl FunctionSample {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, SampleError> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(SampleError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SampleError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at the nodes of a one-dimensional grid.
    pub fn from_fn_1d(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self, SampleError> {
        let values = grid.axis().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    /// Samples `f(x, y)` at the nodes of a two-dimensional grid.
    pub fn from_fn_2d(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self, SampleError> {
        let axis = grid.axis();
        let mut values = Vec::with_capacity(grid.len());
        for &y in &axis {
            for &x in &axis {
                values.push(f(x, y));
            }
        }
        Self::new(grid, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `α·self + β·other` on the same grid.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        }
    }

    /// Discrete L² norm under the grid's quadrature weights.
    pub fn l2_norm(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values at the nodes of a coarser grid whose nodes are a subset of
    /// this grid's nodes.
    pub fn restrict(&self, coarse: &Grid) -> Result<Self, SampleError> {
        coarse.validate()?;
        let nested = |fine_cells: usize, coarse_cells: usize| {
            (coarse_cells > 0 && fine_cells.is_multiple_of(coarse_cells)).then(|| fine_cells / coarse_cells)
        };
        let (nf, nc) = (self.grid.resolution(), coarse.resolution());
        let stride = match (&self.grid, coarse) {
            (Grid::Interval { start: a, end: b, .. }, Grid::Interval { start: c, end: d, .. }) if a == c && b == d => {
                nested(nf - 1, nc - 1)
            }
            (Grid::Square { .. }, Grid::Square { .. }) => nested(nf - 1, nc - 1),
            (Grid::Periodic { length: a, .. }, Grid::Periodic { length: b, .. })
            | (Grid::PeriodicSquare { length: a, .. }, Grid::PeriodicSquare { length: b, .. })
                if a == b =>
            {
                nested(nf, nc)
            }
            _ => None,
        }
        .ok_or_else(|| SampleError::InvalidGrid(format!("{coarse:?} is not nested in {:?}", self.grid)))?;
        let values = if self.grid.dimension() == 1 {
            (0..nc).map(|i| self.values[i * stride]).collect()
        } else {
            let mut v = Vec::with_capacity(nc * nc);
            for i in 0..nc {
                for j in 0..nc {
                    v.push(self.values[i * stride * nf + j * stride]);
                }
            }
            v
        };
        Ok(Self {
            grid: coarse.clone(),
            values,
        })
    }
}
