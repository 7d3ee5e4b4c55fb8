//! Seeded random streams.
//!
//! Every consumer draws from ChaCha8 keyed by `(seed, stream)`; distinct
//! streams never overlap, so adding draws to one consumer does not shift
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub mod stream {
    pub const INIT: u64 = 1;
    pub const BATCH: u64 = 2;
    pub const COLLOCATION: u64 = 3;
    pub const GP_SUBSAMPLE: u64 = 10;
    pub const RF_BOOTSTRAP: u64 = 11;
    pub const SYNTH_NOISE: u64 = 20;
    pub const TEST: u64 = 99;
}

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
