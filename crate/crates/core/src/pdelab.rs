//! Model problems and synthetic operator datasets.
//!
//! * 1D Poisson `−u'' = f` on `[0,1]` with zero Dirichlet data: second-order
//!   finite differences and a tridiagonal solve.
//! * 2D Darcy `−div(a∇u) = f` on `[0,1]²` with zero Dirichlet data: 5-point
//!   conservative scheme with harmonic-mean face coefficients, solved by
//!   Jacobi-preconditioned conjugate gradients.
//! * 1D viscous Burgers `u_t + (u²/2)_x = ν u_xx` with periodic boundary
//!   conditions: Fourier pseudo-spectral in space with 2/3-rule dealiasing and
//!   classical RK4 in time.
//! * Periodic screened Poisson `−u'' + c u = f`, solved exactly in Fourier
//!   space; its multiplier is `1/(k² + c)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{FftPlan, RngStream};
use crate::probes::{kl_decompose, kl_decompose_2d, sample_gp, CovarianceSpec, Domain, ProbeError};
use crate::sample::{FunctionSample, Grid, SampleError};

/// Relative residual at which the Darcy iteration stops.
pub const DARCY_TOLERANCE: f64 = 1e-10;
/// Diffusive RK4 step constant: `Δt ≤ C_ν h²/ν`.
pub const BURGERS_DIFFUSIVE_CFL: f64 = 0.25;
/// Advective step constant: `Δt ≤ C_a h/max|u|`.
pub const BURGERS_ADVECTIVE_CFL: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("unsupported grid: {0}")]
    InvalidGrid(String),
    #[error("input and coefficient grids differ")]
    GridMismatch,
    #[error("coefficient must be positive, found {value} at index {index}")]
    NonPositiveCoefficient { index: usize, value: f64 },
    #[error("iteration stopped after {iterations} steps at relative residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("solution blew up at t = {time}; retry with a time step below {suggested_dt:e}")]
    Unstable { time: f64, suggested_dt: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    Incompatible(String),
    #[error("pair {index}: {source}")]
    Pair { index: usize, source: Box<PdeError> },
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// `G(x, y) = min(x, y) − xy`, the Green's function of `−u'' = f`, `u(0) = u(1) = 0`.
pub fn green_poisson_1d(x: f64, y: f64) -> Result<f64, PdeError> {
    for p in [x, y] {
        if !(0.0..=1.0).contains(&p) {
            return Err(PdeError::InvalidParameter(format!("point {p} outside [0, 1]")));
        }
    }
    Ok(x.min(y) - x * y)
}

fn require_unit_interval(grid: &Grid, min_points: usize) -> Result<usize, PdeError> {
    match *grid {
        Grid::Interval { start, end, points } if start == 0.0 && end == 1.0 && points >= min_points => Ok(points),
        _ => Err(PdeError::InvalidGrid(format!(
            "need a uniform grid on [0, 1] with at least {min_points} points, got {grid:?}"
        ))),
    }
}

/// Solves `−u'' = f` with `u(0) = u(1) = 0`; boundary values of `f` are ignored.
pub fn solve_poisson_1d(f: &FunctionSample) -> Result<FunctionSample, PdeError> {
    let s = require_unit_interval(&f.grid, 3)?;
    let h = 1.0 / (s - 1) as f64;
    let n = s - 2;
    // Thomas algorithm for tridiag(−1, 2, −1) u = h² f.
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 0..n {
        let rhs = h * h * f.values[i + 1];
        if i == 0 {
            c_prime[0] = -0.5;
            d_prime[0] = rhs / 2.0;
        } else {
            let denom = 2.0 + c_prime[i - 1];
            c_prime[i] = -1.0 / denom;
            d_prime[i] = (rhs + d_prime[i - 1]) / denom;
        }
    }
    let mut u = vec![0.0; s];
    for i in (0..n).rev() {
        u[i + 1] = d_prime[i] - if i + 1 < n { c_prime[i] * u[i + 2] } else { 0.0 };
    }
    Ok(FunctionSample::new(f.grid.clone(), u)?)
}

/// Largest absolute interior residual of `−(u_{i−1} − 2u_i + u_{i+1})/h² = f_i`
/// together with the boundary values of `u`.
pub fn poisson_residual(f: &FunctionSample, u: &FunctionSample) -> Result<f64, PdeError> {
    let s = require_unit_interval(&f.grid, 3)?;
    if u.grid != f.grid {
        return Err(PdeError::GridMismatch);
    }
    let h2 = ((s - 1) as f64).powi(-2);
    let v = &u.values;
    let interior = (1..s - 1).map(|i| ((-v[i - 1] + 2.0 * v[i] - v[i + 1]) / h2 - f.values[i]).abs());
    Ok(interior.fold(v[0].abs().max(v[s - 1].abs()), f64::max))
}

/// `T(f) = 12` where `f ≥ 0` and `3` where `f < 0`.
pub fn threshold_coefficient(field: &FunctionSample) -> FunctionSample {
    FunctionSample {
        grid: field.grid.clone(),
        values: field
            .values
            .iter()
            .map(|&v| if v >= 0.0 { 12.0 } else { 3.0 })
            .collect(),
    }
}

/// Piecewise-constant Darcy coefficient `T(f)` for `f` a periodic Gaussian
/// field evaluated at the nodes of the `s × s` unit-square grid.
pub fn darcy_coefficient(stream: &mut RngStream, spec: &CovarianceSpec, s: usize) -> Result<FunctionSample, PdeError> {
    if s < 8 {
        return Err(PdeError::InvalidParameter(format!(
            "darcy resolution must be at least 8, got {s}"
        )));
    }
    let basis = kl_decompose_2d(spec, s)?;
    let field = basis.sample(&Grid::Square { points: s }, stream)?;
    Ok(threshold_coefficient(&field))
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a == b {
        a
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Diagnostics of a Darcy solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DarcyStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `−div(a∇u) = f` on the `s × s` unit-square grid with `u = 0` on the boundary.
pub fn solve_darcy_2d(a: &FunctionSample, f: &FunctionSample) -> Result<FunctionSample, PdeError> {
    solve_darcy_2d_with_stats(a, f).map(|(u, _)| u)
}

pub fn solve_darcy_2d_with_stats(
    a: &FunctionSample,
    f: &FunctionSample,
) -> Result<(FunctionSample, DarcyStats), PdeError> {
    let Grid::Square { points: s } = a.grid else {
        return Err(PdeError::InvalidGrid(format!(
            "darcy needs a square grid, got {:?}",
            a.grid
        )));
    };
    if f.grid != a.grid {
        return Err(PdeError::GridMismatch);
    }
    if s < 3 {
        return Err(PdeError::InvalidGrid(format!(
            "need at least 3 points per axis, got {s}"
        )));
    }
    if let Some(index) = a.values.iter().position(|&v| v.is_nan() || v <= 0.0) {
        return Err(PdeError::NonPositiveCoefficient {
            index,
            value: a.values[index],
        });
    }
    let h2 = ((s - 1) as f64).powi(-2);
    let at = |i: usize, j: usize| a.values[i * s + j];
    // east[i·s + j] couples (i, j) and (i, j+1); north[i·s + j] couples (i, j) and (i+1, j).
    let mut east = vec![0.0; s * s];
    let mut north = vec![0.0; s * s];
    for i in 0..s {
        for j in 0..s {
            if j + 1 < s {
                east[i * s + j] = harmonic_mean(at(i, j), at(i, j + 1));
            }
            if i + 1 < s {
                north[i * s + j] = harmonic_mean(at(i, j), at(i + 1, j));
            }
        }
    }
    let interior = |k: usize| {
        let (i, j) = (k / s, k % s);
        i > 0 && j > 0 && i + 1 < s && j + 1 < s
    };
    let diag: Vec<f64> = (0..s * s)
        .map(|k| {
            if interior(k) {
                east[k] + east[k - 1] + north[k] + north[k - s]
            } else {
                1.0
            }
        })
        .collect();
    // y = A x on interior nodes, with x = 0 on the boundary.
    let apply = |x: &[f64], y: &mut [f64]| {
        for k in 0..s * s {
            y[k] = if interior(k) {
                diag[k] * x[k]
                    - east[k] * x[k + 1]
                    - east[k - 1] * x[k - 1]
                    - north[k] * x[k + s]
                    - north[k - s] * x[k - s]
            } else {
                0.0
            };
        }
    };
    let b: Vec<f64> = (0..s * s)
        .map(|k| if interior(k) { h2 * f.values[k] } else { 0.0 })
        .collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut u = vec![0.0; s * s];
    if b_norm == 0.0 {
        return Ok((
            FunctionSample::new(a.grid.clone(), u)?,
            DarcyStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; s * s];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iterations = 10 * s * s + 100;
    let mut residual = 1.0;
    for iteration in 1..=max_iterations {
        apply(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for k in 0..s * s {
            u[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        residual = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
        if residual <= DARCY_TOLERANCE {
            // Confirm against the true residual, not the recurrence.
            apply(&u, &mut ap);
            let true_residual = b.iter().zip(&ap).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt() / b_norm;
            if true_residual <= DARCY_TOLERANCE {
                return Ok((
                    FunctionSample::new(a.grid.clone(), u)?,
                    DarcyStats {
                        iterations: iteration,
                        relative_residual: true_residual,
                    },
                ));
            }
            r = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
        }
        for k in 0..s * s {
            z[k] = r[k] / diag[k];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..s * s {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(PdeError::NonConvergence {
        iterations: max_iterations,
        residual,
    })
}

/// Viscous Burgers parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurgersParams {
    pub viscosity: f64,
    pub final_time: f64,
    /// Drop the advection term (heat equation); used to isolate the diffusion.
    #[serde(default = "yes")]
    pub nonlinear: bool,
}

fn yes() -> bool {
    true
}

impl BurgersParams {
    pub fn new(viscosity: f64, final_time: f64) -> Self {
        Self {
            viscosity,
            final_time,
            nonlinear: true,
        }
    }
}

fn periodic_resolution(grid: &Grid) -> Result<(usize, f64), PdeError> {
    match *grid {
        Grid::Periodic { length, points } => Ok((points, length)),
        _ => Err(PdeError::InvalidGrid(format!("need a periodic 1D grid, got {grid:?}"))),
    }
}

/// Signed integer wavenumber of FFT bin `j`.
fn signed_mode(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Time step used by [`solve_burgers_1d`] for the given grid and data:
/// `min(C_ν h²/ν, C_a h/max|u0|)`, shortened to divide `T` evenly.
pub fn burgers_time_step(s: usize, length: f64, params: &BurgersParams, max_abs_u0: f64) -> (f64, usize) {
    let h = length / s as f64;
    let mut dt = BURGERS_DIFFUSIVE_CFL * h * h / params.viscosity;
    if params.nonlinear && max_abs_u0 > 0.0 {
        dt = dt.min(BURGERS_ADVECTIVE_CFL * h / max_abs_u0);
    }
    let steps = (params.final_time / dt).ceil().max(1.0) as usize;
    (params.final_time / steps as f64, steps)
}

/// Advances `u0` to `t = T` and returns `u(·, T)`.
pub fn solve_burgers_1d(u0: &FunctionSample, params: &BurgersParams) -> Result<FunctionSample, PdeError> {
    let (s, length) = periodic_resolution(&u0.grid)?;
    if !s.is_power_of_two() || s < 4 {
        return Err(PdeError::InvalidGrid(format!(
            "resolution must be a power of two ≥ 4, got {s}"
        )));
    }
    if !(params.viscosity > 0.0 && params.viscosity.is_finite()) {
        return Err(PdeError::InvalidParameter(format!(
            "viscosity must be positive, got {}",
            params.viscosity
        )));
    }
    if !(params.final_time >= 0.0 && params.final_time.is_finite()) {
        return Err(PdeError::InvalidParameter(format!(
            "final time must be nonnegative, got {}",
            params.final_time
        )));
    }
    let (dt, steps) = burgers_time_step(s, length, params, u0.max_abs());
    if params.final_time == 0.0 {
        return Ok(u0.clone());
    }
    let plan = FftPlan::<f64>::new(s).expect("s >= 4");
    let scale = 2.0 * std::f64::consts::PI / length;
    let ik: Vec<Complex64> = (0..s)
        .map(|j| {
            let m = signed_mode(j, s);
            // The Nyquist bin has no odd derivative.
            let k = if j == s / 2 { 0.0 } else { scale * m as f64 };
            Complex64::new(0.0, k)
        })
        .collect();
    let k2: Vec<f64> = (0..s).map(|j| (scale * signed_mode(j, s) as f64).powi(2)).collect();
    let keep: Vec<bool> = (0..s)
        .map(|j| 3 * signed_mode(j, s).unsigned_abs() as usize <= s)
        .collect();
    let nu = params.viscosity;

    let rhs = |u_hat: &[Complex64], out: &mut [Complex64]| {
        for j in 0..s {
            out[j] = -nu * k2[j] * u_hat[j];
        }
        if params.nonlinear {
            let mut buf: Vec<Complex64> = u_hat
                .iter()
                .zip(&keep)
                .map(|(&z, &k)| if k { z } else { Complex64::new(0.0, 0.0) })
                .collect();
            plan.inverse_in_place(&mut buf);
            for z in buf.iter_mut() {
                *z = Complex64::new(0.5 * z.re * z.re, 0.0);
            }
            plan.forward_in_place(&mut buf);
            for j in 0..s {
                if keep[j] {
                    out[j] -= ik[j] * buf[j];
                }
            }
        }
    };

    let mut u_hat = plan.forward_real(&u0.values);
    let energy0: f64 = u_hat.iter().map(|z| z.norm_sqr()).sum();
    let mut k1 = vec![Complex64::default(); s];
    let mut k2v = vec![Complex64::default(); s];
    let mut k3 = vec![Complex64::default(); s];
    let mut k4 = vec![Complex64::default(); s];
    let mut stage = vec![Complex64::default(); s];
    for step in 0..steps {
        rhs(&u_hat, &mut k1);
        for j in 0..s {
            stage[j] = u_hat[j] + 0.5 * dt * k1[j];
        }
        rhs(&stage, &mut k2v);
        for j in 0..s {
            stage[j] = u_hat[j] + 0.5 * dt * k2v[j];
        }
        rhs(&stage, &mut k3);
        for j in 0..s {
            stage[j] = u_hat[j] + dt * k3[j];
        }
        rhs(&stage, &mut k4);
        for j in 0..s {
            u_hat[j] += dt / 6.0 * (k1[j] + 2.0 * k2v[j] + 2.0 * k3[j] + k4[j]);
        }
        let energy: f64 = u_hat.iter().map(|z| z.norm_sqr()).sum();
        if !energy.is_finite() || energy > 1e6 * (energy0 + f64::MIN_POSITIVE) {
            return Err(PdeError::Unstable {
                time: (step + 1) as f64 * dt,
                suggested_dt: dt / 4.0,
            });
        }
    }
    // Keep the real symmetric part; the imaginary residue is roundoff.
    let values = plan.inverse_real(&u_hat);
    Ok(FunctionSample::new(u0.grid.clone(), values)?)
}

/// Solves `−u'' + c u = f` on a periodic grid exactly in Fourier space.
pub fn solve_screened_poisson_periodic(f: &FunctionSample, shift: f64) -> Result<FunctionSample, PdeError> {
    let (s, length) = periodic_resolution(&f.grid)?;
    if !(shift > 0.0 && shift.is_finite()) {
        return Err(PdeError::InvalidParameter(format!(
            "shift must be positive, got {shift}"
        )));
    }
    let plan = FftPlan::<f64>::new(s).map_err(|e| PdeError::InvalidGrid(e.to_string()))?;
    let scale = 2.0 * std::f64::consts::PI / length;
    let mut spectrum = plan.forward_real(&f.values);
    for (j, z) in spectrum.iter_mut().enumerate() {
        *z /= (scale * signed_mode(j, s) as f64).powi(2) + shift;
    }
    Ok(FunctionSample::new(f.grid.clone(), plan.inverse_real(&spectrum))?)
}

/// The PDE behind a dataset together with its solver parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Pde {
    /// Source `f` to solution `u` of the 1D Dirichlet Poisson problem.
    Poisson1d,
    /// Coefficient `a` to solution `u` of the Darcy problem with `f = 1`.
    Darcy2d,
    /// Initial condition to `u(·, T)` of periodic viscous Burgers.
    Burgers1d { viscosity: f64, final_time: f64 },
    /// Source to solution of the periodic screened Poisson problem.
    ScreenedPoisson1d { shift: f64 },
}

impl Pde {
    pub fn name(&self) -> &'static str {
        match self {
            Pde::Poisson1d => "poisson1d",
            Pde::Darcy2d => "darcy2d",
            Pde::Burgers1d { .. } => "burgers1d",
            Pde::ScreenedPoisson1d { .. } => "screened-poisson1d",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub pde: Pde,
    pub covariance: CovarianceSpec,
    pub seed: u64,
    pub resolution: usize,
    pub pairs: usize,
    /// Cap on the KL modes drawn per input, when set.
    pub max_modes: Option<usize>,
    /// KL modes actually drawn per input.
    pub kl_modes: usize,
    pub generator: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorDataset {
    pub inputs: Vec<FunctionSample>,
    pub outputs: Vec<FunctionSample>,
    pub provenance: Provenance,
}

impl OperatorDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Grid shared by every sample.
    pub fn grid(&self) -> Grid {
        dataset_grid(
            &self.provenance.pde,
            &self.provenance.covariance,
            self.provenance.resolution,
        )
    }

    /// Checks the pair counts and that every sample sits on the dataset grid.
    pub fn validate(&self) -> Result<(), PdeError> {
        if self.inputs.len() != self.outputs.len() || self.inputs.len() != self.provenance.pairs {
            return Err(PdeError::InvalidParameter(format!(
                "{} inputs, {} outputs, {} pairs recorded",
                self.inputs.len(),
                self.outputs.len(),
                self.provenance.pairs
            )));
        }
        let grid = self.grid();
        if self.inputs.iter().chain(&self.outputs).any(|f| f.grid != grid) {
            return Err(PdeError::GridMismatch);
        }
        Ok(())
    }

    /// Splits off the first `count` pairs; provenance pair counts follow.
    pub fn split_at(&self, count: usize) -> (Self, Self) {
        let count = count.min(self.len());
        let part = |range: std::ops::Range<usize>| {
            let mut provenance = self.provenance.clone();
            provenance.pairs = range.len();
            Self {
                inputs: self.inputs[range.clone()].to_vec(),
                outputs: self.outputs[range].to_vec(),
                provenance,
            }
        };
        (part(0..count), part(count..self.len()))
    }
}

fn dataset_grid(pde: &Pde, spec: &CovarianceSpec, s: usize) -> Grid {
    match (pde, spec.domain) {
        (Pde::Darcy2d, _) => Grid::Square { points: s },
        (_, Domain::Interval { start, end }) => Grid::Interval { start, end, points: s },
        (_, Domain::Periodic { length }) => Grid::Periodic { length, points: s },
    }
}

/// Dataset generation request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetRequest {
    pub pde: Pde,
    pub covariance: CovarianceSpec,
    pub pairs: usize,
    pub resolution: usize,
    pub max_modes: Option<usize>,
}

fn check_combination(req: &DatasetRequest) -> Result<(), PdeError> {
    req.covariance.validate()?;
    let periodic = matches!(req.covariance.domain, Domain::Periodic { .. });
    let bad = |msg: &str| Err(PdeError::Incompatible(format!("{}: {msg}", req.pde.name())));
    match req.pde {
        Pde::Poisson1d => match req.covariance.domain {
            Domain::Interval { start, end } if start == 0.0 && end == 1.0 => Ok(()),
            _ => bad("needs a covariance on the interval [0, 1]"),
        },
        Pde::Darcy2d if !periodic => bad("needs a helmholtz-power covariance on a periodic domain"),
        Pde::Darcy2d => match req.covariance.domain {
            Domain::Periodic { length } if length >= 1.0 => Ok(()),
            _ => bad("periodic length must cover the unit square"),
        },
        Pde::Burgers1d { .. } => match req.covariance.domain {
            Domain::Periodic { length } if (length - 2.0 * std::f64::consts::PI).abs() < 1e-12 => Ok(()),
            _ => bad("needs a periodic covariance of length 2π"),
        },
        Pde::ScreenedPoisson1d { .. } if !periodic => bad("needs a periodic covariance"),
        Pde::ScreenedPoisson1d { .. } => Ok(()),
    }
}

/// Draws `pairs` inputs from the Gaussian process and solves for the outputs.
///
/// Pair `i` uses the stream `stream.derive(i)`, so results do not depend on
/// thread scheduling and a prefix of a larger dataset equals the smaller one.
pub fn make_dataset(req: &DatasetRequest, stream: &RngStream) -> Result<OperatorDataset, PdeError> {
    check_combination(req)?;
    let s = req.resolution;
    let grid = dataset_grid(&req.pde, &req.covariance, s);
    grid.validate()?;
    enum Basis {
        OneD(crate::probes::KLBasis),
        TwoD(crate::probes::PeriodicBasis2d),
    }
    let basis = match req.pde {
        Pde::Darcy2d => {
            let b = kl_decompose_2d(&req.covariance, s)?;
            Basis::TwoD(req.max_modes.map_or(b.clone(), |m| b.truncate(m)))
        }
        _ => {
            let b = kl_decompose(&req.covariance, s)?;
            Basis::OneD(req.max_modes.map_or(b.clone(), |m| b.truncate(m)))
        }
    };
    let kl_modes = match &basis {
        Basis::OneD(b) => b.truncation(),
        Basis::TwoD(b) => b.truncation(),
    };
    let solve_pair = |i: usize| -> Result<(FunctionSample, FunctionSample), PdeError> {
        let mut pair_stream = stream.derive(i as u64);
        match (&basis, req.pde) {
            (Basis::TwoD(b), Pde::Darcy2d) => {
                let a = threshold_coefficient(&b.sample(&grid, &mut pair_stream)?);
                let f = FunctionSample {
                    grid: grid.clone(),
                    values: vec![1.0; grid.len()],
                };
                let u = solve_darcy_2d(&a, &f)?;
                Ok((a, u))
            }
            (Basis::OneD(b), pde) => {
                let f = sample_gp(b, &mut pair_stream);
                let u = match pde {
                    Pde::Poisson1d => solve_poisson_1d(&f)?,
                    Pde::Burgers1d { viscosity, final_time } => {
                        solve_burgers_1d(&f, &BurgersParams::new(viscosity, final_time))?
                    }
                    Pde::ScreenedPoisson1d { shift } => solve_screened_poisson_periodic(&f, shift)?,
                    Pde::Darcy2d => unreachable!("darcy uses the 2D basis"),
                };
                Ok((f, u))
            }
            _ => unreachable!("basis matches the PDE"),
        }
    };
    let pairs: Vec<(FunctionSample, FunctionSample)> = (0..req.pairs)
        .into_par_iter()
        .map(|i| {
            solve_pair(i).map_err(|e| PdeError::Pair {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;
    let (inputs, outputs) = pairs.into_iter().unzip();
    Ok(OperatorDataset {
        inputs,
        outputs,
        provenance: Provenance {
            pde: req.pde,
            covariance: req.covariance,
            seed: stream.seed(),
            resolution: s,
            pairs: req.pairs,
            max_modes: req.max_modes,
            kl_modes,
            generator: RngStream::ALGORITHM.to_string(),
        },
    })
}
