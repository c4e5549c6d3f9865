//! Deterministic fan-out over sample indices.
//!
//! Samples are cut into chunks of [`CHUNK`] consecutive indices regardless of
//! the worker count. Each chunk is reduced in index order, and the chunk
//! results come back in chunk order, so folding them sequentially gives the
//! same floating-point result for any number of workers.

use rayon::prelude::*;
use std::ops::Range;

pub const CHUNK: u64 = 64;

/// Applies `f` to each chunk of `0..n` on `workers` threads and returns the
/// chunk results in order.
pub fn map_chunks<A, F>(workers: usize, n: u64, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(Range<u64>) -> A + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let range = |c: u64| c * CHUNK..((c + 1) * CHUNK).min(n);
    if workers <= 1 {
        return (0..chunks).map(|c| f(range(c))).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| (0..chunks).into_par_iter().map(|c| f(range(c))).collect())
}
