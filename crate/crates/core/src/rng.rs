//! Reproducible random substreams.
//!
//! Every random draw in the crate is keyed by `(master seed, domain, index)`,
//! so a trial's realization never depends on which thread ran it or on how
//! many trials ran before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating the independent uses of one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Geometry = 1,
    Channel = 2,
    Correlated = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 64-bit key of substream `index` in `domain`.
pub fn substream_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    let a = splitmix64(seed ^ splitmix64(domain as u64));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, domain, index))
}
