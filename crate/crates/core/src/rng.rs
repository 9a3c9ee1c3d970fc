//! Seeded, portable random streams.
//!
//! Every random consumer in the crate takes a `&mut impl Rng`; reproducible
//! entry points construct a [`StreamRng`] from a master seed and a stream id so
//! parallel work (folds, chunks) gets independent but fixed streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under master seed `seed`.
pub fn derive(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
