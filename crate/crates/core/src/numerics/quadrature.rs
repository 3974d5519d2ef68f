use crate::numerics::NumericsError;
use crate::scalar::Scalar;

/// Composite trapezoid weights on a strictly increasing grid.
pub fn trapezoid_weights<T: Scalar>(grid: &[T]) -> Result<Vec<T>, NumericsError> {
    if grid.len() < 2 {
        return Err(NumericsError::GridTooShort {
            needed: 2,
            found: grid.len(),
        });
    }
    if let Some(i) = grid
        .windows(2)
        .position(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(NumericsError::NonMonotoneGrid(i + 1));
    }
    let half = T::lit(0.5);
    let n = grid.len();
    let mut w = vec![T::zero(); n];
    for i in 0..n - 1 {
        let h = (grid[i + 1] - grid[i]) * half;
        w[i] = w[i] + h;
        w[i + 1] = w[i + 1] + h;
    }
    Ok(w)
}

/// Uniform weights `length / n` of the periodic trapezoid rule on `n` points.
pub fn periodic_weights<T: Scalar>(n: usize, length: T) -> Vec<T> {
    vec![length / T::from_count(n); n]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        assert_eq!(trapezoid_weights(&[0.0, 1.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn x_squared_at_101_points() {
        let grid: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let w = trapezoid_weights(&grid).unwrap();
        let integral: f64 = w.iter().zip(&grid).map(|(w, x)| w * x * x).sum();
        assert!((integral - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn constant_integrates_exactly_on_nonuniform_grid() {
        let grid = [0.0, 0.1, 0.15, 0.6, 0.61, 1.0];
        let w = trapezoid_weights(&grid).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            trapezoid_weights(&[0.0, 0.5, 0.5, 1.0]),
            Err(NumericsError::NonMonotoneGrid(2))
        ));
        assert!(matches!(
            trapezoid_weights(&[0.0]),
            Err(NumericsError::GridTooShort { .. })
        ));
    }
}
