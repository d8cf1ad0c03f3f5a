//! Seeded, stream-splittable random number generation.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator keyed
//! by `(seed, stream)`. Work is partitioned into fixed chunks that each own a
//! stream, so results do not depend on how many threads execute the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Combines a purpose tag with an index into a stream id, so independent
/// consumers of the same seed never share a stream.
pub fn stream_id(tag: u32, index: u64) -> u64 {
    ((tag as u64) << 40) ^ index
}
