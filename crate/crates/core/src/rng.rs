//! Keyed deterministic random streams.
//!
//! Every random decision in the crate draws from a stream derived from a
//! base seed plus a key path (a domain tag followed by indices such as the
//! round, client or table). Streams for different keys are independent, so
//! adding a table or a client never perturbs the draws of existing ones and
//! work can be executed in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating the uses of a single base seed.
pub(crate) mod tag {
    pub const SCHEME_TABLE: u64 = 0x01;
    pub const SKETCH_VALUE: u64 = 0x02;
    pub const SKETCH_SIGN: u64 = 0x03;
    pub const FEATURE_HASH: u64 = 0x04;
    pub const PARTITION: u64 = 0x05;
    pub const SYNTH_LABELS: u64 = 0x06;
    pub const SYNTH_PROTOTYPE: u64 = 0x07;
    pub const SYNTH_NOISE: u64 = 0x08;
    pub const MODEL_INIT: u64 = 0x09;
    pub const CLIENT_SELECT: u64 = 0x0a;
    pub const LOCAL_SHUFFLE: u64 = 0x0b;
    pub const HOLDOUT: u64 = 0x0c;
    pub const ANALYSIS: u64 = 0x0d;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with a key path into a single 64-bit seed.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0x6a09_e667_f3bc_c908);
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(0x3c6e_f372_fe94_f82b)));
    }
    h
}

/// A ChaCha8 stream keyed on `(seed, keys)`.
pub fn stream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, keys))
}
