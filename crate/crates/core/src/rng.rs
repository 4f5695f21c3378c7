//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream selected by a
//! `(seed, counter, purpose)` triple, so a trajectory is reproducible no
//! matter in which order trials or time steps are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    SensingMatrix = 1,
    InitialMatrix = 2,
    InitialSupport = 3,
    InitialSigns = 4,
    Additions = 5,
    Decreases = 6,
    Signs = 7,
    LevelSplit = 8,
    Noise = 9,
    TrialSeed = 10,
    SubsetSampling = 11,
    Instance = 12,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `(seed, counter, purpose)`.
pub fn stream(seed: u64, counter: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    rng.set_stream(splitmix64(counter ^ splitmix64(purpose as u64)));
    rng
}

/// Derives a child seed, e.g. the per-trial seed from a master seed.
pub fn derive_seed(seed: u64, counter: u64, purpose: Purpose) -> u64 {
    splitmix64(splitmix64(seed ^ (purpose as u64).rotate_left(32)) ^ counter)
}
