//! Data-parallel execution helpers.
//!
//! Sweeps, multistarts and brute-force enumeration are embarrassingly parallel
//! over independent pure solves. With the `parallel` feature (default) the
//! indexed map runs on the rayon pool; without it the same call degrades to a
//! sequential loop, so results are identical either way. [`map_indexed_seq`]
//! is always sequential and exists so benchmarks can compare both paths.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to `0..n` and collects results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Work-splitting floor for cheap per-item closures.
const MIN_CHUNK: usize = 512;

/// Applies `f` to `0..n` and collects results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(n, f)
}

/// Sequential reference implementation of [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Minimum over `0..n` of `f(i)`, keyed by `(value, index)` so ties break
/// toward the smallest index regardless of evaluation order.
#[cfg(feature = "parallel")]
pub fn min_indexed<F>(n: usize, f: F) -> Option<(f64, usize)>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .with_min_len(MIN_CHUNK)
        .map(|i| (f(i), i))
        .reduce_with(better)
}

/// Minimum over `0..n` of `f(i)`, keyed by `(value, index)`.
#[cfg(not(feature = "parallel"))]
pub fn min_indexed<F>(n: usize, f: F) -> Option<(f64, usize)>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    min_indexed_seq(n, f)
}

/// Sequential reference implementation of [`min_indexed`].
pub fn min_indexed_seq<F>(n: usize, f: F) -> Option<(f64, usize)>
where
    F: Fn(usize) -> f64,
{
    (0..n).map(|i| (f(i), i)).reduce(better)
}

fn better(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    // NaN loses to anything; ties go to the smaller index.
    if b.0 < a.0 || (a.0.is_nan() && !b.0.is_nan()) || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_prefers_smallest_index_on_ties() {
        let vals = [3.0, 1.0, 1.0, 2.0];
        let got = min_indexed(4, |i| vals[i]).unwrap();
        assert_eq!(got, (1.0, 1));
        assert_eq!(min_indexed_seq(4, |i| vals[i]).unwrap(), (1.0, 1));
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_indexed(100, |i| (i * i) as f64);
        let b = map_indexed_seq(100, |i| (i * i) as f64);
        assert_eq!(a, b);
    }

    #[test]
    fn nan_never_wins() {
        let vals = [f64::NAN, 2.0, f64::NAN];
        let got = min_indexed(3, |i| vals[i]).unwrap();
        assert_eq!(got, (2.0, 1));
    }
}
