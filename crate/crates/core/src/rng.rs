//! Seed derivation. Every module draws from its own ChaCha stream of the
//! global seed, so adding a consumer never shifts another module's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream offsets per consumer.
pub mod stream {
    pub const CHANNELS: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const HELD_OUT: u64 = 4;
    pub const NET_INIT: u64 = 5;
    pub const FEDSE: u64 = 6;
    pub const SNAPSHOT: u64 = 7;
}

/// Generator for `stream` of the given global seed.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
