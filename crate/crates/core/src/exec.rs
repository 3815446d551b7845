//! Data-parallel primitives with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it the same functions run on the calling thread. Reductions are split
//! into fixed-size blocks whose partial sums are combined in order, so results are
//! bit-identical between the two builds and across thread counts.

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

const REDUCE_BLOCK: usize = 4096;

/// Whether this build executes in parallel.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// `f(i)` for `i in 0..n`, collected in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps a slice element-wise, preserving order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Calls `f(index, element)` on every element.
pub fn for_each_indexed<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_iter_mut().enumerate().for_each(|(i, v)| f(i, v));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
    }
}

/// Calls `f(chunk_index, chunk)` on consecutive chunks of `chunk` elements.
pub fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Deterministic sum of `f(i)` for `i in 0..n`.
pub fn sum_complex<F>(n: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync + Send,
{
    let blocks = n.div_ceil(REDUCE_BLOCK);
    let partial = map_range(blocks, |b| {
        let lo = b * REDUCE_BLOCK;
        let hi = (lo + REDUCE_BLOCK).min(n);
        (lo..hi).fold(Complex64::new(0.0, 0.0), |acc, i| acc + f(i))
    });
    partial.into_iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b)
}

/// Deterministic sum of `f(i)` for `i in 0..n`.
pub fn sum_real<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(REDUCE_BLOCK);
    let partial = map_range(blocks, |b| {
        let lo = b * REDUCE_BLOCK;
        let hi = (lo + REDUCE_BLOCK).min(n);
        (lo..hi).fold(0.0, |acc, i| acc + f(i))
    });
    partial.into_iter().sum()
}

/// Deterministic maximum of `f(i)` (0 for an empty range).
pub fn max_real<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(REDUCE_BLOCK);
    map_range(blocks, |b| {
        let lo = b * REDUCE_BLOCK;
        let hi = (lo + REDUCE_BLOCK).min(n);
        (lo..hi).fold(0.0f64, |acc, i| acc.max(f(i)))
    })
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_are_blockwise_deterministic() {
        let n = 3 * REDUCE_BLOCK + 17;
        let s = sum_real(n, |i| (i as f64).sin());
        let again = sum_real(n, |i| (i as f64).sin());
        assert_eq!(s.to_bits(), again.to_bits());
        let direct: f64 = (0..n).map(|i| (i as f64).sin()).sum();
        assert!((s - direct).abs() < 1e-9);
    }

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn chunks_see_their_index() {
        let mut v = vec![0usize; 40];
        for_each_chunk(&mut v, 8, |c, chunk| chunk.iter_mut().for_each(|x| *x = c));
        assert_eq!(v[0], 0);
        assert_eq!(v[39], 4);
    }
}
