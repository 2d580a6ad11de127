//! Seed derivation for independent, reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub const DOMAIN_SENSOR: u64 = 0x5345_4e53;
pub const DOMAIN_CHANNEL: u64 = 0x4348_414e;
pub const DOMAIN_SWEEP: u64 = 0x5357_4550;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a domain tag and an index into a new seed.
pub fn derive_seed(base: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(domain)) ^ index)
}

pub fn stream(base: u64, domain: u64, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(base, domain, index))
}
