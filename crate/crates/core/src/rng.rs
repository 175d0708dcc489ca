//! Deterministic random streams.
//!
//! Every replication, bootstrap resample and MCMC chain draws from its own
//! ChaCha8 stream whose seed is derived from a master seed and a path of
//! integer labels. Results therefore do not depend on how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `master` with each label in `path` into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Labels used as the first element of derived seed paths.
pub mod label {
    pub const COVARIATES: u64 = 1;
    pub const TREATMENT: u64 = 2;
    pub const OUTCOME: u64 = 3;
    pub const REPLICATION: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const MCMC: u64 = 6;
    pub const GBM: u64 = 7;
    pub const POPULATION: u64 = 8;
    pub const CALIBRATION: u64 = 9;
    pub const COEFFICIENTS: u64 = 10;
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Index drawn from unnormalized non-negative weights.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = uniform(rng) * total;
    for (k, &p) in probs.iter().enumerate() {
        if u < p {
            return k;
        }
        u -= p;
    }
    probs.len() - 1
}
