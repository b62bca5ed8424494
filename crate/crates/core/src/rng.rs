//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is expanded from the
//! 64-bit seed with `SeedableRng::seed_from_u64` (PCG32 expansion). Keyed
//! streams select the ChaCha stream id, so trial `t` of a Monte Carlo run draws
//! from `(seed, t)` regardless of which worker evaluates it. Gaussian variates
//! use the Box–Muller transform on `1 - u` with `u` uniform in `[0, 1)`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn stream(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn keyed_stream(self, key: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(key);
        rng
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed(seed)
    }
}

/// Standard-normal sampler over any uniform source.
pub struct Gaussian<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> Gaussian<R> {
    pub fn new(rng: R) -> Self {
        Gaussian { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}
