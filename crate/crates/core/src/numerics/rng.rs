use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// Seeded random stream: ChaCha8 keyed by the 64-bit seed, standard normal
/// deviates by the Marsaglia polar method.
///
/// Same seed and same call order give bitwise-identical output within one
/// build. A stream has a single consumer; parallel work uses [`RngStream::derive`].
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl RngStream {
    pub const ALGORITHM: &'static str = "chacha8+marsaglia-polar";

    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream for task `index`, seeded by a SplitMix64 mix of
    /// the parent seed and the index. Does not advance the parent.
    pub fn derive(&self, index: u64) -> Self {
        Self::new(splitmix64(
            self.seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `n` i.i.d. standard normal entries drawn from `stream`.
pub fn gaussian_vector<T: Scalar>(stream: &mut RngStream, n: usize) -> Vec<T> {
    (0..n).map(|_| T::lit(stream.standard_normal())).collect()
}
