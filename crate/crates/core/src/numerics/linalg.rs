use crate::numerics::dense::{dot, norm2, DenseMatrix};
use crate::numerics::NumericsError;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

/// Thin QR factors `M = Q R` with `Q` of orthonormal columns.
#[derive(Clone, Debug)]
pub struct QrFactors<T> {
    pub q: DenseMatrix<T>,
    pub r: DenseMatrix<T>,
    /// Number of diagonal entries of `R` above `max(rows, cols)·ε·max|Rᵢᵢ|`.
    pub numerical_rank: usize,
    pub rank_deficient: bool,
}

/// Householder QR. Rank-deficient input still yields an orthonormal `Q` and
/// an exact `QR = M`; the deficiency is reported through `rank_deficient`.
pub fn qr_thin<T: Scalar>(m: &DenseMatrix<T>) -> Result<QrFactors<T>, NumericsError> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(NumericsError::WideMatrix { rows, cols });
    }
    if !m.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    // Work on columns stored contiguously.
    let mut a = m.transpose();
    let mut reflectors: Vec<(Vec<T>, T)> = Vec::with_capacity(cols);
    for k in 0..cols {
        let x = &a.row(k)[k..];
        let norm = norm2(x);
        if norm == T::zero() {
            reflectors.push((vec![T::zero(); rows - k], T::zero()));
            continue;
        }
        let alpha = if x[0] >= T::zero() { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] = v[0] - alpha;
        let vtv = dot(&v, &v);
        let beta = if vtv == T::zero() { T::zero() } else { T::lit(2.0) / vtv };
        for j in k..cols {
            let col = &mut a.row_mut(j)[k..];
            let s = beta * dot(&v, col);
            for (c, &vi) in col.iter_mut().zip(&v) {
                *c = *c - s * vi;
            }
        }
        reflectors.push((v, beta));
    }
    let r = DenseMatrix::from_fn(cols, cols, |i, j| if i <= j { a[(j, i)] } else { T::zero() });

    // Q = H_0 H_1 ... H_{c-1} applied to the first `cols` columns of I.
    let mut qt = DenseMatrix::zeros(cols, rows);
    for j in 0..cols {
        qt[(j, j)] = T::one();
    }
    for (k, (v, beta)) in reflectors.iter().enumerate().rev() {
        if *beta == T::zero() {
            continue;
        }
        for j in 0..cols {
            let col = &mut qt.row_mut(j)[k..];
            let s = *beta * dot(v, col);
            for (c, &vi) in col.iter_mut().zip(v) {
                *c = *c - s * vi;
            }
        }
    }

    let diag_max = (0..cols).fold(T::zero(), |acc, i| acc.max(r[(i, i)].abs()));
    let tol = T::from_count(rows.max(cols)) * T::epsilon() * diag_max;
    let numerical_rank = (0..cols).filter(|&i| r[(i, i)].abs() > tol).count();
    Ok(QrFactors {
        q: qt.transpose(),
        r,
        numerical_rank,
        rank_deficient: numerical_rank < cols,
    })
}

/// Thin SVD `M = U diag(σ) Vᵀ` with `r = min(rows, cols)` singular triplets in
/// nonincreasing order.
#[derive(Clone, Debug)]
pub struct SvdFactors<T> {
    pub u: DenseMatrix<T>,
    pub singular_values: Vec<T>,
    pub v: DenseMatrix<T>,
}

impl<T: Scalar> SvdFactors<T> {
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        self.truncated(self.singular_values.len())
    }

    /// Best rank-`k` approximation from the leading triplets.
    pub fn truncated(&self, k: usize) -> DenseMatrix<T> {
        let k = k.min(self.singular_values.len());
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = DenseMatrix::zeros(m, n);
        for l in 0..k {
            let s = self.singular_values[l];
            if s == T::zero() {
                continue;
            }
            for i in 0..m {
                let a = self.u[(i, l)] * s;
                if a == T::zero() {
                    continue;
                }
                for (o, j) in out.row_mut(i).iter_mut().zip(0..n) {
                    *o = *o + a * self.v[(j, l)];
                }
            }
        }
        out
    }

    /// `sqrt(Σ_{i≥k} σᵢ²)`, the Frobenius error of the rank-`k` truncation.
    pub fn tail_norm(&self, k: usize) -> T {
        let tail: Vec<T> = self.singular_values.iter().skip(k).copied().collect();
        norm2(&tail)
    }
}

/// One-sided Jacobi SVD.
pub fn svd_dense<T: Scalar>(m: &DenseMatrix<T>) -> Result<SvdFactors<T>, NumericsError> {
    if !m.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    if m.rows() < m.cols() {
        let t = svd_tall(&m.transpose());
        return Ok(SvdFactors {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    Ok(svd_tall(m))
}

fn svd_tall<T: Scalar>(m: &DenseMatrix<T>) -> SvdFactors<T> {
    let (rows, cols) = m.shape();
    // Row j of `w` is column j of the working matrix; row j of `vt` is column j of V.
    let mut w = m.transpose();
    let mut vt = DenseMatrix::identity(cols);
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(w.row(p), w.row(p));
                let beta = dot(w.row(q), w.row(q));
                let gamma = dot(w.row(p), w.row(q));
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, T)> = (0..cols).map(|j| (j, norm2(w.row(j)))).collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let sigma_max = order.first().map_or(T::zero(), |o| o.1);
    let tiny = sigma_max * eps * eps;

    let mut u_cols: Vec<Vec<T>> = Vec::with_capacity(cols);
    let mut singular_values = Vec::with_capacity(cols);
    let mut v = DenseMatrix::zeros(cols, cols);
    let mut pending = Vec::new();
    for (slot, &(j, s)) in order.iter().enumerate() {
        singular_values.push(s);
        v.set_column(slot, vt.row(j));
        if s > tiny && s > T::zero() {
            u_cols.push(w.row(j).iter().map(|&x| x / s).collect());
        } else {
            u_cols.push(vec![T::zero(); rows]);
            pending.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &pending, rows);
    SvdFactors {
        u: DenseMatrix::from_columns(rows, &u_cols),
        singular_values,
        v,
    }
}

fn rotate_rows<T: Scalar>(m: &mut DenseMatrix<T>, p: usize, q: usize, c: T, s: T) {
    let n = m.cols();
    for k in 0..n {
        let a = m[(p, k)];
        let b = m[(q, k)];
        m[(p, k)] = c * a - s * b;
        m[(q, k)] = s * a + c * b;
    }
}

/// Fills the `pending` slots with unit vectors orthogonal to every other column.
fn complete_orthonormal<T: Scalar>(cols: &mut [Vec<T>], pending: &[usize], n: usize) {
    let mut candidate = 0;
    for &slot in pending {
        while candidate < n {
            let mut e = vec![T::zero(); n];
            e[candidate] = T::one();
            candidate += 1;
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || c.iter().all(|&x| x == T::zero()) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    for (ei, &ci) in e.iter_mut().zip(c) {
                        *ei = *ei - proj * ci;
                    }
                }
            }
            let nrm = norm2(&e);
            if nrm > T::lit(0.5) {
                cols[slot] = e.into_iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues nonincreasing.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub eigenvalues: Vec<T>,
    /// Column `j` is the unit eigenvector of `eigenvalues[j]`.
    pub eigenvectors: DenseMatrix<T>,
}

/// Cyclic Jacobi eigenvalue iteration. Only the symmetric part of `a` is used.
pub fn eigh<T: Scalar>(a: &DenseMatrix<T>) -> Result<SymmetricEigen<T>, NumericsError> {
    let (n, c) = a.shape();
    if n != c {
        return Err(NumericsError::NotSquare { rows: n, cols: c });
    }
    if !a.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let mut m = DenseMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)]) * T::lit(0.5));
    let mut v = DenseMatrix::identity(n);
    let scale = m.frobenius_norm();
    let threshold = T::epsilon() * scale * T::lit(1e-3);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= threshold {
                    continue;
                }
                rotated = true;
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                let tau = sn / (T::one() + cs);
                m[(p, p)] = m[(p, p)] - t * apq;
                m[(q, q)] = m[(q, q)] + t * apq;
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let g = m[(r, p)];
                    let h = m[(r, q)];
                    let new_p = g - sn * (h + g * tau);
                    let new_q = h + sn * (g - h * tau);
                    m[(r, p)] = new_p;
                    m[(p, r)] = new_p;
                    m[(r, q)] = new_q;
                    m[(q, r)] = new_q;
                }
                for r in 0..n {
                    let g = v[(r, p)];
                    let h = v[(r, q)];
                    v[(r, p)] = g - sn * (h + g * tau);
                    v[(r, q)] = h + sn * (g - h * tau);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let eigenvectors = DenseMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Solution of `min ‖Mx − b‖² + λ‖x‖²`.
#[derive(Clone, Debug)]
pub struct RidgeSolution<T> {
    pub x: Vec<T>,
    pub effective_rank: usize,
    /// Set when `λ = 0` and `M` is numerically rank deficient; `x` is then the
    /// minimum-norm least-squares solution.
    pub min_norm_fallback: bool,
}

/// Ridge least squares against one matrix and many right-hand sides; the SVD
/// of `M` is computed once.
#[derive(Clone, Debug)]
pub struct RidgeSolver<T> {
    svd: SvdFactors<T>,
    rows: usize,
    cols: usize,
}

impl<T: Scalar> RidgeSolver<T> {
    pub fn new(m: &DenseMatrix<T>) -> Result<Self, NumericsError> {
        Ok(Self {
            svd: svd_dense(m)?,
            rows: m.rows(),
            cols: m.cols(),
        })
    }

    pub fn singular_values(&self) -> &[T] {
        &self.svd.singular_values
    }

    pub fn solve(&self, b: &[T], ridge: T) -> Result<RidgeSolution<T>, NumericsError> {
        if ridge < T::zero() {
            return Err(NumericsError::NegativeRidge(ridge.to_f64_lossy()));
        }
        if b.len() != self.rows {
            return Err(NumericsError::DimensionMismatch {
                expected: self.rows,
                found: b.len(),
            });
        }
        let sigma = &self.svd.singular_values;
        let smax = sigma.first().copied().unwrap_or(T::zero());
        let cutoff = T::from_count(self.rows.max(self.cols)) * T::epsilon() * smax;
        let utb = self.svd.u.transpose_matvec(b)?;
        let mut coeffs = vec![T::zero(); sigma.len()];
        let mut rank = 0;
        for (l, &s) in sigma.iter().enumerate() {
            if ridge == T::zero() {
                if s > cutoff && s > T::zero() {
                    coeffs[l] = utb[l] / s;
                    rank += 1;
                }
            } else {
                coeffs[l] = utb[l] * s / (s * s + ridge);
                if s > cutoff {
                    rank += 1;
                }
            }
        }
        let x = self.svd.v.matvec(&coeffs)?;
        Ok(RidgeSolution {
            x,
            effective_rank: rank,
            min_norm_fallback: ridge == T::zero() && rank < self.cols,
        })
    }
}

pub fn lstsq_ridge<T: Scalar>(m: &DenseMatrix<T>, b: &[T], ridge: T) -> Result<RidgeSolution<T>, NumericsError> {
    if ridge < T::zero() {
        return Err(NumericsError::NegativeRidge(ridge.to_f64_lossy()));
    }
    RidgeSolver::new(m)?.solve(b, ridge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_identity_and_column_norm() {
        let qr = qr_thin(&DenseMatrix::<f64>::identity(4)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((qr.q[(i, j)].abs() - e).abs() < 1e-15);
                assert!((qr.r[(i, j)].abs() - e).abs() < 1e-15);
            }
        }
        let qr = qr_thin(&DenseMatrix::<f64>::from_rows(&[vec![3.0], vec![4.0]]).unwrap()).unwrap();
        assert!((qr.r[(0, 0)].abs() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn qr_rejects_wide_and_flags_rank() {
        assert!(matches!(
            qr_thin(&DenseMatrix::<f64>::zeros(2, 3)),
            Err(NumericsError::WideMatrix { .. })
        ));
        let m = DenseMatrix::from_fn(5, 3, |i, j| if j == 2 { 0.0 } else { (i + j) as f64 });
        let qr = qr_thin(&m).unwrap();
        assert!(qr.rank_deficient);
        let back = qr.q.matmul(&qr.r).unwrap();
        assert!(crate::numerics::relative_frobenius_error(&back, &m) < 1e-14);
    }

    #[test]
    fn svd_diag_and_rank_one() {
        let svd = svd_dense(&DenseMatrix::<f64>::diagonal(&[1.0, 3.0])).unwrap();
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-15);
        assert!((svd.singular_values[1] - 1.0).abs() < 1e-15);

        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [0.3, 1.0, -1.0, 2.0, 0.1];
        let m = DenseMatrix::from_fn(4, 5, |i, j| u[i] * v[j]);
        let svd = svd_dense(&m).unwrap();
        assert!(svd.singular_values[1] <= 1e-12 * svd.singular_values[0]);
        // U stays orthonormal even when the trailing σ vanish.
        let utu = svd.u.transpose_matmul(&svd.u).unwrap();
        let eye = DenseMatrix::identity(4);
        assert!(crate::numerics::relative_frobenius_error(&utu, &eye) < 1e-12);
    }

    #[test]
    fn eigh_small_symmetric() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = eigh(&a).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(matches!(
            eigh(&DenseMatrix::<f64>::zeros(2, 3)),
            Err(NumericsError::NotSquare { .. })
        ));
    }

    #[test]
    fn ridge_identity_and_dominance() {
        let b = vec![1.0f64, -2.0, 3.0];
        let sol = lstsq_ridge(&DenseMatrix::identity(3), &b, 0.0).unwrap();
        assert!(!sol.min_norm_fallback);
        for (x, y) in sol.x.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        let m = DenseMatrix::from_fn(4, 3, |i, j| ((i + 1) * (j + 2)) as f64 / 7.0 + (i == j) as usize as f64);
        let b = vec![1.0, 2.0, -1.0, 0.5];
        let sol = lstsq_ridge(&m, &b, 1e12).unwrap();
        let bound = 1e-6 * norm2(&b) / m.frobenius_norm();
        assert!(norm2(&sol.x) <= bound);
        assert!(matches!(
            lstsq_ridge(&m, &b, -1.0),
            Err(NumericsError::NegativeRidge(_))
        ));
    }

    #[test]
    fn ridge_min_norm_flag() {
        // Two identical columns: the minimum-norm solution splits the weight.
        let m = DenseMatrix::<f64>::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let sol = lstsq_ridge(&m, &[1.0, 2.0], 0.0).unwrap();
        assert!(sol.min_norm_fallback);
        assert!((sol.x[0] - 0.5).abs() < 1e-14 && (sol.x[1] - 0.5).abs() < 1e-14);
    }
}
