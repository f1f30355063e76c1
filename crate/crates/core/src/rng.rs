//! Deterministic stream derivation for parallel Monte-Carlo work.
//!
//! Every replicate gets its own counter-based generator keyed by
//! `(master_seed, stream)`, so results are bit-identical no matter how the
//! replicates are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for one unit of work. Streams with the same master seed are
/// statistically independent.
pub fn replicate_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Pack a coarse block id (e.g. a grid position) and a replicate index into
/// one stream id.
pub fn stream_id(block: u32, replicate: u32) -> u64 {
    ((block as u64) << 32) | replicate as u64
}
