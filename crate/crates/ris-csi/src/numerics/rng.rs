//! Reproducible, splittable random number generation.
//!
//! Every stochastic quantity in the simulator is drawn from an [`RngStream`],
//! a `(seed, stream-id)` pair backed by a counter-based ChaCha generator.
//! Identical pairs reproduce identical sequences bit-for-bit; distinct stream
//! ids are statistically independent, so per-sample streams can be consumed
//! in parallel without any ordering effects.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::CVec;

/// A named, replayable randomness source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Derives a child stream from structured coordinates.
    ///
    /// `domain` separates usage classes (channel draws, noise, init, ...),
    /// `ctx` separates stages/splits within a domain and `index` enumerates
    /// samples. The coordinates are mixed into a fresh stream id, so child
    /// streams never collide with structurally different ones in practice.
    pub fn derive(&self, domain: u16, ctx: u16, index: u64) -> RngStream {
        let tag = ((domain as u64) << 56) | ((ctx as u64) << 40) | (index & ((1 << 40) - 1));
        RngStream { seed: self.seed, stream: splitmix64(self.stream ^ tag) }
    }

    /// Instantiates the generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws `n` i.i.d. circular-symmetric complex Gaussian samples with the
/// given total variance (real and imaginary parts each carry `variance/2`).
pub fn cgauss(stream: RngStream, n: usize, variance: f64) -> Result<CVec> {
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::Parameter(format!(
            "cgauss variance must be finite and non-negative, got {variance}"
        )));
    }
    let mut rng = stream.rng();
    let sigma = (variance / 2.0).sqrt();
    let entries: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sigma * re, sigma * im)
        })
        .collect();
    Ok(CVec::from(entries))
}
