//! Deterministic random sources.
//!
//! Every random draw in the crate comes from a ChaCha8 generator seeded with
//! a caller-supplied 64-bit seed. Independent purposes use fixed ChaCha
//! stream ids so that, for one seed, the data sample, the training index
//! stream, the evaluation measure and the landmark choice never share bits.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_DATA: u64 = 0;
pub(crate) const STREAM_INDICES: u64 = 1;
pub(crate) const STREAM_EVAL: u64 = 2;
pub(crate) const STREAM_LANDMARKS: u64 = 3;
pub(crate) const STREAM_EVAL_NOISE: u64 = 4;

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
