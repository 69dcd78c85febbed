//! Seeded, thread-count-independent parallel sampling.
//!
//! Work is cut into fixed-size batches; batch `i` always draws from the
//! ChaCha stream `i` of the run seed, so results depend only on
//! `(seed, total, batch size)` and never on how rayon schedules batches.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per batch.
pub const BATCH: usize = 4096;

/// RNG for batch `index` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `work(rng, batch_index, count)` over batches covering `total`
/// samples and returns the per-batch results in batch order.
pub fn par_batches<T, F>(total: usize, seed: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> T + Sync,
{
    let batches = total.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = BATCH.min(total - b * BATCH);
            let mut rng = batch_rng(seed, b as u64);
            work(&mut rng, b, count)
        })
        .collect()
}
