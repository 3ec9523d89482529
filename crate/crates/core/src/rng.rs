//! Seeded random streams.
//!
//! Every random object is drawn from a ChaCha20 stream identified by a
//! `(seed, stream)` pair: the seed selects the key and the stream index the
//! ChaCha nonce. Parallel work splits on the stream index (trial number,
//! shot batch, candidate partition), so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha20Rng {
        self.stream(0)
    }

    pub fn stream(self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }

    /// A derived seed for trial `index`, e.g. the `index`-th POVM of a sweep.
    pub fn derive(self, index: u64) -> Seed {
        // splitmix64 finalizer over (seed, index)
        let mut z = self.0 ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// Standard complex normal: real and imaginary parts i.i.d. `N(0, 1/2)`.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
