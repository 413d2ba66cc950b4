//! Seeded random streams.
//!
//! Every consumer of randomness (initialization, batch order, surgery)
//! draws from its own stream derived from the run seed, so adding or
//! removing one consumer never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags for [`derive_seed`].
pub mod stream {
    pub const INIT: u64 = 0x01;
    pub const BATCH: u64 = 0x02;
    pub const LIFECYCLE: u64 = 0x03;
    pub const REPLICATE: u64 = 0x04;
    pub const SYNTHETIC: u64 = 0x05;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and an index into an independent seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index)
}

pub fn stream_rng(base: u64, stream: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base, stream, index))
}
