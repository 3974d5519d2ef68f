//! Gaussian-process source terms through a discrete Karhunen–Loève expansion.
//!
//! Squared-exponential and Matérn kernels live on an interval and are
//! decomposed by a quadrature-weighted (Nyström) Gram eigenproblem, so the
//! discrete eigenvalues approximate those of the integral operator. The
//! Helmholtz-power kernel `A(−Δ + cI)^{−ν}` lives on a periodic interval where
//! its eigenpairs are known in closed form: `λ_j = A((2πj/L)² + c)^{−ν}` with
//! cosine/sine eigenfunctions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::numerics::{eigh, gaussian_vector, DenseMatrix, NumericsError, RngStream};
use crate::sample::{FunctionSample, Grid, SampleError};

/// Smallest Gram eigenvalue tolerated, relative to the largest.
pub const GRAM_NEGATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("invalid covariance specification: {0}")]
    InvalidSpec(String),
    #[error("point {0} lies outside the covariance domain")]
    OutOfDomain(f64),
    #[error("Gram matrix is not positive semidefinite: smallest eigenvalue {smallest:e} (largest {largest:e})")]
    NotPositiveDefinite { smallest: f64, largest: f64 },
    #[error("need at least 2 sensors, got {0}")]
    TooFewSensors(usize),
    #[error("target point {0} lies outside the source grid")]
    Extrapolation(f64),
    #[error("coefficient vector has length {found}, basis has {expected} modes")]
    CoefficientLength { expected: usize, found: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CovarianceFamily {
    /// `exp(−|x−y|²/(2ℓ²))`.
    SquaredExponential { length_scale: f64 },
    /// Matérn class with smoothness `nu`.
    Matern { length_scale: f64, nu: f64 },
    /// `scale · (−Δ + shift·I)^{−nu}` on a periodic domain.
    HelmholtzPower { scale: f64, nu: f64, shift: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Domain {
    Interval { start: f64, end: f64 },
    Periodic { length: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSpec {
    pub family: CovarianceFamily,
    pub domain: Domain,
}

impl CovarianceSpec {
    pub fn squared_exponential(length_scale: f64) -> Self {
        Self {
            family: CovarianceFamily::SquaredExponential { length_scale },
            domain: Domain::Interval { start: 0.0, end: 1.0 },
        }
    }

    pub fn matern(length_scale: f64, nu: f64) -> Self {
        Self {
            family: CovarianceFamily::Matern { length_scale, nu },
            domain: Domain::Interval { start: 0.0, end: 1.0 },
        }
    }

    pub fn helmholtz_power(scale: f64, nu: f64, shift: f64, length: f64) -> Self {
        Self {
            family: CovarianceFamily::HelmholtzPower { scale, nu, shift },
            domain: Domain::Periodic { length },
        }
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ProbeError::InvalidSpec(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        match self.family {
            CovarianceFamily::SquaredExponential { length_scale } => positive(length_scale, "length_scale")?,
            CovarianceFamily::Matern { length_scale, nu } => {
                positive(length_scale, "length_scale")?;
                positive(nu, "nu")?;
            }
            CovarianceFamily::HelmholtzPower { scale, nu, shift } => {
                positive(scale, "scale")?;
                positive(nu, "nu")?;
                if !(shift >= 0.0 && shift.is_finite()) {
                    return Err(ProbeError::InvalidSpec(format!(
                        "shift must be nonnegative, got {shift}"
                    )));
                }
            }
        }
        match (self.family, self.domain) {
            (_, Domain::Interval { start, end }) if !(end > start && start.is_finite() && end.is_finite()) => {
                Err(ProbeError::InvalidSpec(format!("empty interval [{start}, {end}]")))
            }
            (_, Domain::Periodic { length }) => positive(length, "length").and_then(|_| {
                if matches!(self.family, CovarianceFamily::HelmholtzPower { .. }) {
                    Ok(())
                } else {
                    Err(ProbeError::InvalidSpec(
                        "squared-exponential and Matérn kernels require an interval domain".into(),
                    ))
                }
            }),
            (CovarianceFamily::HelmholtzPower { .. }, Domain::Interval { .. }) => Err(ProbeError::InvalidSpec(
                "helmholtz-power requires a periodic domain".into(),
            )),
            _ => Ok(()),
        }
    }

    fn contains(&self, x: f64) -> bool {
        match self.domain {
            Domain::Interval { start, end } => {
                let slack = 1e-12 * (end - start);
                x >= start - slack && x <= end + slack
            }
            Domain::Periodic { length } => x >= -1e-12 * length && x <= length * (1.0 + 1e-12),
        }
    }

    /// Length scale when the family has one.
    pub fn length_scale(&self) -> Option<f64> {
        match self.family {
            CovarianceFamily::SquaredExponential { length_scale } | CovarianceFamily::Matern { length_scale, .. } => {
                Some(length_scale)
            }
            CovarianceFamily::HelmholtzPower { .. } => None,
        }
    }
}

pub fn kernel_eval(spec: &CovarianceSpec, x: f64, y: f64) -> Result<f64, ProbeError> {
    spec.validate()?;
    for p in [x, y] {
        if !spec.contains(p) {
            return Err(ProbeError::OutOfDomain(p));
        }
    }
    Ok(kernel_unchecked(spec, x, y))
}

fn kernel_unchecked(spec: &CovarianceSpec, x: f64, y: f64) -> f64 {
    let r = (x - y).abs();
    match spec.family {
        CovarianceFamily::SquaredExponential { length_scale } => (-r * r / (2.0 * length_scale * length_scale)).exp(),
        CovarianceFamily::Matern { length_scale, nu } => matern(r, length_scale, nu),
        CovarianceFamily::HelmholtzPower { scale, nu, shift } => {
            let Domain::Periodic { length } = spec.domain else {
                unreachable!("validated")
            };
            helmholtz_series(r, length, scale, nu, shift)
        }
    }
}

fn matern(r: f64, ell: f64, nu: f64) -> f64 {
    let t = r / ell;
    if nu == 0.5 {
        (-t).exp()
    } else if nu == 1.5 {
        let a = 3f64.sqrt() * t;
        (1.0 + a) * (-a).exp()
    } else if nu == 2.5 {
        let a = 5f64.sqrt() * t;
        (1.0 + a + a * a / 3.0) * (-a).exp()
    } else {
        matern_general(r, ell, nu)
    }
}

/// `2^{1−ν}/Γ(ν) · z^ν K_ν(z)` with `z = √(2ν) r/ℓ`.
fn matern_general(r: f64, ell: f64, nu: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let z = (2.0 * nu).sqrt() * r / ell;
    if z > 700.0 {
        return 0.0;
    }
    let log_value = (1.0 - nu) * 2f64.ln() - gamma(nu).ln() + nu * z.ln() + log_bessel_k(nu, z);
    log_value.exp().min(1.0)
}

/// `ln K_ν(z)` for `z > 0` from `K_ν(z) = ∫₀^∞ exp(−z cosh t) cosh(νt) dt`.
///
/// The integrand is even and analytic in the strip `|Im t| < π/2`, so the
/// trapezoid rule converges geometrically; step 0.05 is far below the
/// roundoff floor.
fn log_bessel_k(nu: f64, z: f64) -> f64 {
    let h = 0.05;
    let log_term = |t: f64| -z * t.cosh() + log_cosh(nu * t);
    // Shift by the peak of the log-integrand to stay in range.
    let t_peak = if z < nu { (nu / z).asinh() } else { 0.0 };
    let peak = log_term(t_peak);
    let mut sum = 0.5 * (log_term(0.0) - peak).exp();
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let term = (log_term(t) - peak).exp();
        sum += term;
        if t > t_peak && term < 1e-18 * sum {
            break;
        }
        k += 1;
    }
    peak + (sum * h).ln()
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (0.5 * (1.0 + (-2.0 * a).exp())).ln()
}

fn helmholtz_eigenvalue(j: usize, length: f64, scale: f64, nu: f64, shift: f64) -> f64 {
    let k = 2.0 * PI * j as f64 / length;
    scale * (k * k + shift).powf(-nu)
}

/// `K(r) = (1/L) Σ_{j∈ℤ} λ_j cos(2πjr/L)`; the zero mode is dropped when `c = 0`.
fn helmholtz_series(r: f64, length: f64, scale: f64, nu: f64, shift: f64) -> f64 {
    let mut sum = if shift > 0.0 {
        helmholtz_eigenvalue(0, length, scale, nu, shift)
    } else {
        0.0
    };
    for j in 1..1_000_000usize {
        let lam = helmholtz_eigenvalue(j, length, scale, nu, shift);
        sum += 2.0 * lam * (2.0 * PI * j as f64 * r / length).cos();
        if lam < 1e-17 * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    sum / length
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Trig {
    Constant,
    Cos(usize),
    Sin(usize),
    /// `(−1)^i` on the grid, the cosine at the Nyquist wavenumber.
    Nyquist(usize),
}

impl Trig {
    fn eval(self, x: f64, length: f64) -> f64 {
        let c = (2.0 / length).sqrt();
        match self {
            Trig::Constant => 1.0 / length.sqrt(),
            Trig::Cos(j) => c * (2.0 * PI * j as f64 * x / length).cos(),
            Trig::Sin(j) => c * (2.0 * PI * j as f64 * x / length).sin(),
            Trig::Nyquist(j) => (2.0 * PI * j as f64 * x / length).cos() / length.sqrt(),
        }
    }

    fn wavenumber(self) -> usize {
        match self {
            Trig::Constant => 0,
            Trig::Cos(j) | Trig::Sin(j) | Trig::Nyquist(j) => j,
        }
    }
}

#[derive(Clone, Debug)]
enum ModeSource {
    /// Nyström eigenvectors; extension to other points needs the kernel.
    Nystrom {
        nodes: Vec<f64>,
        weights: Vec<f64>,
    },
    Trigonometric {
        modes: Vec<Trig>,
        length: f64,
    },
}

/// Truncated discrete Karhunen–Loève basis.
#[derive(Clone, Debug)]
pub struct KLBasis {
    spec: CovarianceSpec,
    grid: Grid,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: DenseMatrix<f64>,
    smallest_gram_eigenvalue: f64,
    source: ModeSource,
}

impl KLBasis {
    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `λ_1 ≥ … ≥ λ_J ≥ 0`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `j` is `ψ_j` on the grid.
    pub fn eigenfunctions(&self) -> &DenseMatrix<f64> {
        &self.eigenfunctions
    }

    pub fn truncation(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Smallest eigenvalue of the Gram matrix before clamping (zero for
    /// analytic bases).
    pub fn smallest_gram_eigenvalue(&self) -> f64 {
        self.smallest_gram_eigenvalue
    }

    /// Keeps the leading `j` modes.
    pub fn truncate(&self, j: usize) -> Self {
        let j = j.min(self.truncation());
        let mut out = self.clone();
        out.eigenvalues.truncate(j);
        out.eigenfunctions = self.eigenfunctions.leading_columns(j);
        if let ModeSource::Trigonometric { modes, .. } = &mut out.source {
            modes.truncate(j);
        }
        out
    }

    /// Eigenfunctions evaluated at arbitrary points of the domain: analytic for
    /// the trigonometric basis, Nyström extension
    /// `ψ_j(x) = λ_j⁻¹ Σ_i w_i K(x, x_i) ψ_j(x_i)` otherwise.
    pub fn evaluate_at(&self, points: &[f64]) -> Result<DenseMatrix<f64>, ProbeError> {
        if let Some(&p) = points.iter().find(|&&p| !self.spec.contains(p)) {
            return Err(ProbeError::OutOfDomain(p));
        }
        let j_count = self.truncation();
        Ok(match &self.source {
            ModeSource::Trigonometric { modes, length } => {
                DenseMatrix::from_fn(points.len(), j_count, |i, j| modes[j].eval(points[i], *length))
            }
            ModeSource::Nystrom { nodes, weights } => {
                let k = DenseMatrix::from_fn(points.len(), nodes.len(), |i, l| {
                    weights[l] * kernel_unchecked(&self.spec, points[i], nodes[l])
                });
                let mut psi = k.matmul(&self.eigenfunctions)?;
                for i in 0..points.len() {
                    for (v, lam) in psi.row_mut(i).iter_mut().zip(&self.eigenvalues) {
                        *v = if *lam > 0.0 { *v / lam } else { 0.0 };
                    }
                }
                psi
            }
        })
    }

    /// `Σ_j √λ_j c_j ψ_j` at the given points.
    pub fn synthesize(&self, coefficients: &[f64], points: &[f64]) -> Result<Vec<f64>, ProbeError> {
        self.check_coefficients(coefficients)?;
        let psi = self.evaluate_at(points)?;
        Ok(psi.matvec(&self.scaled(coefficients))?)
    }

    /// `Σ_j √λ_j c_j ψ_j` on the basis grid.
    pub fn sample_with_coefficients(&self, coefficients: &[f64]) -> Result<FunctionSample, ProbeError> {
        self.check_coefficients(coefficients)?;
        let values = self.eigenfunctions.matvec(&self.scaled(coefficients))?;
        Ok(FunctionSample::new(self.grid.clone(), values)?)
    }

    fn scaled(&self, c: &[f64]) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(c)
            .map(|(l, c)| l.max(0.0).sqrt() * c)
            .collect()
    }

    fn check_coefficients(&self, c: &[f64]) -> Result<(), ProbeError> {
        if c.len() != self.truncation() {
            return Err(ProbeError::CoefficientLength {
                expected: self.truncation(),
                found: c.len(),
            });
        }
        Ok(())
    }
}

/// Whether `m` sensors satisfy the `m ≥ 1/ℓ` resolution rule.
pub fn sensor_rule_satisfied(length_scale: f64, m: usize) -> bool {
    m as f64 * length_scale >= 1.0
}

/// Discrete KL decomposition on `m` sensors: interval nodes including both
/// endpoints, or `m` uniform periodic nodes.
pub fn kl_decompose(spec: &CovarianceSpec, m: usize) -> Result<KLBasis, ProbeError> {
    spec.validate()?;
    if m < 2 {
        return Err(ProbeError::TooFewSensors(m));
    }
    if let Some(ell) = spec.length_scale() {
        if !sensor_rule_satisfied(ell, m) {
            log::warn!(
                "{m} sensors under-resolve length scale {ell}; use m >= {}",
                (1.0 / ell).ceil()
            );
        }
    }
    match spec.domain {
        Domain::Interval { start, end } => nystrom_basis(spec, Grid::Interval { start, end, points: m }),
        Domain::Periodic { length } => trigonometric_basis(spec, length, m),
    }
}

fn nystrom_basis(spec: &CovarianceSpec, grid: Grid) -> Result<KLBasis, ProbeError> {
    let nodes = grid.axis();
    let weights = grid.weights();
    let m = nodes.len();
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let gram = DenseMatrix::from_fn(m, m, |i, j| {
        sqrt_w[i] * kernel_unchecked(spec, nodes[i], nodes[j]) * sqrt_w[j]
    });
    let eig = eigh(&gram)?;
    let largest = eig.eigenvalues[0];
    let smallest = *eig.eigenvalues.last().expect("m >= 2");
    if smallest < -GRAM_NEGATIVE_TOLERANCE * largest {
        return Err(ProbeError::NotPositiveDefinite { smallest, largest });
    }
    if smallest < 0.0 {
        log::debug!("clamping Gram eigenvalues down to {smallest:e} (largest {largest:e}) to zero");
    }
    let cutoff = f64::EPSILON * largest;
    let truncation = eig.eigenvalues.iter().take_while(|&&l| l >= cutoff).count();
    let eigenvalues = eig.eigenvalues[..truncation].to_vec();
    let eigenfunctions = DenseMatrix::from_fn(m, truncation, |i, j| eig.eigenvectors[(i, j)] / sqrt_w[i]);
    Ok(KLBasis {
        spec: *spec,
        grid,
        weights: weights.clone(),
        eigenvalues,
        eigenfunctions,
        smallest_gram_eigenvalue: smallest,
        source: ModeSource::Nystrom { nodes, weights },
    })
}

/// Trigonometric modes resolvable on `m` periodic nodes, ordered by wavenumber.
fn trig_modes(m: usize, include_constant: bool) -> Vec<Trig> {
    let mut modes = Vec::with_capacity(m);
    if include_constant {
        modes.push(Trig::Constant);
    }
    for j in 1..m.div_ceil(2) {
        modes.push(Trig::Cos(j));
        modes.push(Trig::Sin(j));
    }
    if m.is_multiple_of(2) {
        modes.push(Trig::Nyquist(m / 2));
    }
    modes
}

fn trigonometric_basis(spec: &CovarianceSpec, length: f64, m: usize) -> Result<KLBasis, ProbeError> {
    let CovarianceFamily::HelmholtzPower { scale, nu, shift } = spec.family else {
        unreachable!("validated")
    };
    let grid = Grid::Periodic { length, points: m };
    let nodes = grid.axis();
    let mut modes = trig_modes(m, shift > 0.0);
    let lambda = |t: Trig| helmholtz_eigenvalue(t.wavenumber(), length, scale, nu, shift);
    let largest = modes.first().map_or(0.0, |&t| lambda(t));
    modes.retain(|&t| lambda(t) >= f64::EPSILON * largest);
    let eigenvalues = modes.iter().map(|&t| lambda(t)).collect();
    let eigenfunctions = DenseMatrix::from_fn(m, modes.len(), |i, j| modes[j].eval(nodes[i], length));
    Ok(KLBasis {
        spec: *spec,
        weights: grid.weights(),
        grid,
        eigenvalues,
        eigenfunctions,
        smallest_gram_eigenvalue: 0.0,
        source: ModeSource::Trigonometric { modes, length },
    })
}

/// One draw `X = Σ_{j≤J} √λ_j c_j ψ_j` with `c_j` i.i.d. standard normal.
pub fn sample_gp(basis: &KLBasis, stream: &mut RngStream) -> FunctionSample {
    let c: Vec<f64> = gaussian_vector(stream, basis.truncation());
    basis
        .sample_with_coefficients(&c)
        .expect("coefficient count matches the basis")
}

/// Tensor-product Helmholtz-power basis on a periodic square, with eigenvalues
/// `λ_ab = A((2π/L)²(a² + b²) + c)^{−ν}` for products of 1D trigonometric modes.
#[derive(Clone, Debug)]
pub struct PeriodicBasis2d {
    spec: CovarianceSpec,
    axis_modes: Vec<Trig>,
    /// Retained `(a, b, λ_ab)`, eigenvalues nonincreasing.
    pairs: Vec<(usize, usize, f64)>,
}

/// 2D decomposition with the 1D modes resolvable on `s` points per axis.
pub fn kl_decompose_2d(spec: &CovarianceSpec, s: usize) -> Result<PeriodicBasis2d, ProbeError> {
    spec.validate()?;
    let (CovarianceFamily::HelmholtzPower { scale, nu, shift }, Domain::Periodic { length }) =
        (spec.family, spec.domain)
    else {
        return Err(ProbeError::InvalidSpec(
            "2D fields need the helmholtz-power family".into(),
        ));
    };
    if s < 2 {
        return Err(ProbeError::TooFewSensors(s));
    }
    let axis_modes = trig_modes(s, true);
    let lam = |a: Trig, b: Trig| {
        let k2 = (2.0 * PI / length).powi(2) * ((a.wavenumber().pow(2) + b.wavenumber().pow(2)) as f64);
        if k2 == 0.0 && shift == 0.0 {
            0.0
        } else {
            scale * (k2 + shift).powf(-nu)
        }
    };
    let mut pairs = Vec::new();
    for (a, &ma) in axis_modes.iter().enumerate() {
        for (b, &mb) in axis_modes.iter().enumerate() {
            pairs.push((a, b, lam(ma, mb)));
        }
    }
    let largest = pairs.iter().fold(0.0f64, |m, p| m.max(p.2));
    pairs.retain(|p| p.2 > 0.0 && p.2 >= f64::EPSILON * largest);
    pairs.sort_by(|p, q| q.2.total_cmp(&p.2));
    Ok(PeriodicBasis2d {
        spec: *spec,
        axis_modes,
        pairs,
    })
}

impl PeriodicBasis2d {
    pub fn truncation(&self) -> usize {
        self.pairs.len()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.2).collect()
    }

    /// Keeps the leading `j` modes.
    pub fn truncate(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.pairs.truncate(j);
        out
    }

    /// Field with the given KL coefficients at the nodes of a 2D grid whose
    /// axis lies in the periodic domain.
    pub fn synthesize(&self, coefficients: &[f64], grid: &Grid) -> Result<FunctionSample, ProbeError> {
        if coefficients.len() != self.truncation() {
            return Err(ProbeError::CoefficientLength {
                expected: self.truncation(),
                found: coefficients.len(),
            });
        }
        let Domain::Periodic { length } = self.spec.domain else {
            unreachable!("validated")
        };
        if grid.dimension() != 2 {
            return Err(ProbeError::InvalidSpec("2D basis needs a 2D grid".into()));
        }
        let axis = grid.axis();
        if let Some(&p) = axis.iter().find(|&&p| !self.spec.contains(p)) {
            return Err(ProbeError::OutOfDomain(p));
        }
        let na = self.axis_modes.len();
        let mut core = DenseMatrix::zeros(na, na);
        for (&(a, b, lam), c) in self.pairs.iter().zip(coefficients) {
            core[(a, b)] = lam.sqrt() * c;
        }
        let psi = DenseMatrix::from_fn(axis.len(), na, |i, a| self.axis_modes[a].eval(axis[i], length));
        // values[i·n + j] = Σ_ab core_ab ψ_a(x_j) ψ_b(y_i) = (Ψ coreᵀ Ψᵀ)_ij
        let field = psi.matmul(&core.transpose())?.matmul(&psi.transpose())?;
        Ok(FunctionSample::new(grid.clone(), field.into_vec())?)
    }

    pub fn sample(&self, grid: &Grid, stream: &mut RngStream) -> Result<FunctionSample, ProbeError> {
        let c: Vec<f64> = gaussian_vector(stream, self.truncation());
        self.synthesize(&c, grid)
    }
}

/// Piecewise-linear interpolation of a 1D sample onto the nodes of `targets`.
/// Periodic samples wrap around; interval samples refuse to extrapolate.
pub fn interpolate_sensors(f: &FunctionSample, targets: &Grid) -> Result<FunctionSample, ProbeError> {
    targets.validate()?;
    if f.grid.dimension() != 1 || targets.dimension() != 1 {
        return Err(ProbeError::InvalidSpec("interpolation is one-dimensional".into()));
    }
    if *targets == f.grid {
        return Ok(f.clone());
    }
    let src = f.grid.axis();
    let n = src.len();
    let h = f.grid.spacing();
    let values = targets
        .axis()
        .into_iter()
        .map(|x| -> Result<f64, ProbeError> {
            match f.grid {
                Grid::Periodic { .. } => {
                    let t = (x / h).rem_euclid(n as f64);
                    let i = (t.floor() as usize).min(n - 1);
                    let frac = snap(t - i as f64);
                    Ok(f.values[i] * (1.0 - frac) + f.values[(i + 1) % n] * frac)
                }
                _ => {
                    let (a, b) = (src[0], src[n - 1]);
                    let slack = 1e-12 * (b - a);
                    if x < a - slack || x > b + slack {
                        return Err(ProbeError::Extrapolation(x));
                    }
                    let t = ((x - a) / h).clamp(0.0, (n - 1) as f64);
                    let i = (t.floor() as usize).min(n - 2);
                    let frac = snap(t - i as f64);
                    Ok(f.values[i] * (1.0 - frac) + f.values[i + 1] * frac)
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FunctionSample::new(targets.clone(), values)?)
}

/// Rounds interpolation fractions within roundoff of a node to the node.
fn snap(frac: f64) -> f64 {
    if frac < 1e-12 {
        0.0
    } else if frac > 1.0 - 1e-12 {
        1.0
    } else {
        frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn se_values() {
        let se = CovarianceSpec::squared_exponential(0.1);
        assert_eq!(kernel_eval(&se, 0.3, 0.3).unwrap(), 1.0);
        assert!((kernel_eval(&se, 0.0, 0.1).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!(matches!(kernel_eval(&se, 0.0, 1.5), Err(ProbeError::OutOfDomain(_))));
    }

    #[test]
    fn matern_general_path_matches_closed_forms() {
        for nu in [0.5, 1.5, 2.5] {
            for r in [1e-3, 0.05, 0.2, 0.7, 2.0] {
                let closed = matern(r, 0.3, nu);
                let general = matern_general(r, 0.3, nu);
                assert!((closed - general).abs() < 1e-12, "nu={nu} r={r}: {closed} vs {general}");
            }
        }
        // Non-half-integer smoothness lies between its neighbours.
        let k = matern(0.2, 0.3, 1.0);
        assert!(k > matern(0.2, 0.3, 0.5) && k < matern(0.2, 0.3, 1.5));
    }

    #[test]
    fn spec_compatibility() {
        let mut bad = CovarianceSpec::helmholtz_power(1.0, 2.0, 9.0, 1.0);
        bad.domain = Domain::Interval { start: 0.0, end: 1.0 };
        assert!(bad.validate().is_err());
        let mut bad = CovarianceSpec::squared_exponential(0.1);
        bad.domain = Domain::Periodic { length: 1.0 };
        assert!(bad.validate().is_err());
        assert!(CovarianceSpec::squared_exponential(-1.0).validate().is_err());
        assert!(CovarianceSpec::helmholtz_power(1.0, 2.0, -1.0, 1.0).validate().is_err());
    }

    #[test]
    fn helmholtz_eigenvalues_analytic() {
        let spec = CovarianceSpec::helmholtz_power(1.0, 2.0, 9.0, 1.0);
        let basis = kl_decompose(&spec, 64).unwrap();
        let lam = basis.eigenvalues();
        assert!((lam[0] - 1.0 / 81.0).abs() < 1e-18);
        let expected = ((2.0 * PI).powi(2) + 9.0).powi(-2);
        assert!((lam[1] - expected).abs() < 1e-18 && (lam[2] - expected).abs() < 1e-18);
        assert!(lam.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zero_eigenvalues_give_zero_sample() {
        let basis = kl_decompose(&CovarianceSpec::squared_exponential(0.2), 20).unwrap();
        let mut zeroed = basis.clone();
        zeroed.eigenvalues.iter_mut().for_each(|l| *l = 0.0);
        let f = sample_gp(&zeroed, &mut RngStream::new(1));
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interpolation_identity_and_linear() {
        let g = Grid::unit_interval(11);
        let f = FunctionSample::from_fn_1d(g.clone(), |x| 3.0 * x - 1.0).unwrap();
        assert_eq!(interpolate_sensors(&f, &g).unwrap(), f);
        let fine = interpolate_sensors(&f, &Grid::unit_interval(97)).unwrap();
        for (x, v) in Grid::unit_interval(97).axis().iter().zip(&fine.values) {
            assert!((v - (3.0 * x - 1.0)).abs() < 1e-14);
        }
        let wide = Grid::Interval {
            start: 0.0,
            end: 1.5,
            points: 4,
        };
        assert!(matches!(
            interpolate_sensors(&f, &wide),
            Err(ProbeError::Extrapolation(_))
        ));
    }

    #[test]
    fn too_few_sensors() {
        assert!(matches!(
            kl_decompose(&CovarianceSpec::squared_exponential(0.1), 1),
            Err(ProbeError::TooFewSensors(1))
        ));
    }
}
