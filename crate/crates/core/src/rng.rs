//! Reproducible random streams.
//!
//! Every random draw in the crate comes from [`seed_stream`]: the master seed
//! fixes a ChaCha key and the stream index selects the nonce, so streams are
//! disjoint by construction and any block of work can be replayed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// Samples handled by one Monte Carlo block, each on its own stream.
pub const BLOCK_SIZE: usize = 4096;

pub fn seed_stream(master_seed: u64, stream_index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_index);
    rng
}

/// Splits `samples` into blocks of [`BLOCK_SIZE`], runs `work(rng, len)` on
/// each with stream `block index`, and returns the results in block order.
pub(crate) fn par_blocks<T: Send>(
    master_seed: u64,
    samples: usize,
    work: impl Fn(&mut StreamRng, usize) -> T + Sync,
) -> Vec<T> {
    let blocks = samples.div_ceil(BLOCK_SIZE);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK_SIZE.min(samples - b * BLOCK_SIZE);
            let mut rng = seed_stream(master_seed, b as u64);
            work(&mut rng, len)
        })
        .collect()
}
