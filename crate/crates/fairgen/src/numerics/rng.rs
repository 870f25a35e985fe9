//! Seeded random source and the two samplers used by the GAN stack.
//!
//! The generator is ChaCha8 — a fixed, portable stream cipher, never the
//! platform default — so a seed fully determines every draw and replays
//! are bit-exact. Gaussian variates come from the Marsaglia polar
//! transform applied to that stream, which keeps the draw sequence under
//! this crate's control.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Uniform draws are clamped into `[GUMBEL_UNIT_CLAMP, 1 - GUMBEL_UNIT_CLAMP]`
/// before the double logarithm so Gumbel noise is always finite.
pub const GUMBEL_UNIT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    state: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> SeededRng {
        SeededRng {
            seed,
            state: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n` via the multiply-shift trick (no modulo bias
    /// worth speaking of at the sizes used here, and branch-free).
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }

    /// One standard Gumbel variate: `-ln(-ln(u))` with `u` clamped away
    /// from both endpoints.
    pub fn next_gumbel(&mut self) -> f64 {
        let u = self
            .next_f64()
            .clamp(GUMBEL_UNIT_CLAMP, 1.0 - GUMBEL_UNIT_CLAMP);
        -(-u.ln()).ln()
    }
}

/// Samples a `rows x cols` matrix of independent `N(mean, stddev^2)`
/// variates. `stddev` must be positive.
pub fn sample_gaussian(
    rng: &mut SeededRng,
    rows: usize,
    cols: usize,
    mean: f64,
    stddev: f64,
) -> Result<Matrix> {
    if !stddev.is_finite() || stddev <= 0.0 {
        return Err(Error::param("stddev", format!("must be positive, got {stddev}")));
    }
    let n = rows * cols;
    let mut data = Vec::with_capacity(n);
    let mut spare = None;
    while data.len() < n {
        let z = match spare.take() {
            Some(z) => z,
            None => {
                // Marsaglia polar: rejection-sample a point in the unit
                // disc, then turn it into two independent normals.
                let (z0, z1) = loop {
                    let u = 2.0 * rng.next_f64() - 1.0;
                    let v = 2.0 * rng.next_f64() - 1.0;
                    let s = u * u + v * v;
                    if s > 0.0 && s < 1.0 {
                        let m = (-2.0 * s.ln() / s).sqrt();
                        break (u * m, v * m);
                    }
                };
                spare = Some(z1);
                z0
            }
        };
        data.push(mean + stddev * z);
    }
    Matrix::from_vec(rows, cols, data)
}

/// Samples a `rows x cols` matrix of independent standard Gumbel noise.
pub fn sample_gumbel(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.next_gumbel()).collect();
    Matrix::from_vec(rows, cols, data).expect("gumbel draws are finite by construction")
}
