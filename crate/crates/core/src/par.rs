//! Data-parallel loop helpers.
//!
//! With the `parallel` feature (default) the loops run on the rayon pool;
//! without it they run sequentially. Reductions always split the index range
//! into fixed chunks of [`CHUNK`] items, sum each chunk left to right and then
//! combine the chunk partials in order, so results are bitwise identical for
//! any thread count and for the sequential build.

use std::ops::AddAssign;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Reduction chunk length.
pub const CHUNK: usize = 4096;

/// Applies `f(i, &mut data[i])` for every element.
pub fn for_each_mut<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * CHUNK;
        for (k, x) in chunk.iter_mut().enumerate() {
            f(base + k, x);
        }
    });
    #[cfg(not(feature = "parallel"))]
    for (i, x) in data.iter_mut().enumerate() {
        f(i, x);
    }
}

/// Builds a vector of length `n` with `f(i)` at index `i`.
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().with_min_len(CHUNK / 4).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fixed-order sum of `f(i)` over `0..n`.
pub fn sum<T, F>(n: usize, f: F) -> T
where
    T: Copy + Default + AddAssign + Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let chunk_sum = |c: usize| {
        let mut acc = T::default();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            acc += f(i);
        }
        acc
    };
    let n_chunks = n.div_ceil(CHUNK);
    #[cfg(feature = "parallel")]
    let partials: Vec<T> = (0..n_chunks).into_par_iter().map(chunk_sum).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<T> = (0..n_chunks).map(chunk_sum).collect();
    let mut total = T::default();
    for p in partials {
        total += p;
    }
    total
}

/// Fixed-order maximum of `f(i)` (0 for an empty range).
pub fn max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).reduce(|| 0.0, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(0.0, f64::max)
    }
}

/// Runs independent jobs, returning their results in input order.
pub fn map_jobs<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Runs `op` on a pool with exactly `threads` workers (sequential build:
/// runs `op` directly).
pub fn with_threads<R, F>(threads: usize, op: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}

/// Number of worker threads loops will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
