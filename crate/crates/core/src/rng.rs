//! Random stream construction.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed by a
//! 64-bit seed and a 64-bit stream id. ChaCha supports 2^64 independent
//! streams per key, so replica `r` of an ensemble reads stream `r` and the
//! result of a run never depends on how replicas are scheduled on threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Stream reserved for i.i.d. portfolio construction.
pub const PORTFOLIO_STREAM: u64 = u64::MAX;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of replicas handled by one unit of parallel work. Fixed so that
/// partial aggregates, and therefore floating point results, do not depend
/// on the worker count.
pub(crate) const BATCH: usize = 256;

/// Splits `0..total` into fixed batches.
pub(crate) fn batches(total: usize) -> Vec<std::ops::Range<usize>> {
    (0..total.div_ceil(BATCH))
        .map(|b| b * BATCH..((b + 1) * BATCH).min(total))
        .collect()
}
