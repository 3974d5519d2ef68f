use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::numerics::NumericsError;
use crate::scalar::Scalar;

/// Forward/inverse transforms of one length, planned once for repeated use
/// (time steppers, multiplier models).
#[derive(Clone)]
pub struct FftPlan<T: Scalar> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(len: usize) -> Result<Self, NumericsError> {
        if len == 0 {
            return Err(NumericsError::EmptyInput);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward DFT in place.
    pub fn forward_in_place(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    /// Inverse DFT in place, scaled by `1/n`.
    pub fn inverse_in_place(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
        let scale = T::one() / T::from_count(self.len);
        for z in buf.iter_mut() {
            *z = *z * scale;
        }
    }

    pub fn forward_real(&self, x: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, spectrum: &[Complex<T>]) -> Vec<T> {
        let mut buf = spectrum.to_vec();
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

pub fn fft_forward<T: Scalar>(v: &[Complex<T>]) -> Result<Vec<Complex<T>>, NumericsError> {
    let plan = FftPlan::new(v.len())?;
    let mut buf = v.to_vec();
    plan.forward_in_place(&mut buf);
    Ok(buf)
}

pub fn fft_inverse<T: Scalar>(v: &[Complex<T>]) -> Result<Vec<Complex<T>>, NumericsError> {
    let plan = FftPlan::new(v.len())?;
    let mut buf = v.to_vec();
    plan.inverse_in_place(&mut buf);
    Ok(buf)
}
