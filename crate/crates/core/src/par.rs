//! Data-parallel map with a sequential fallback.
//!
//! Sweep rows, replicates, and seed batches are independent tasks whose
//! random streams are derived from their index, so evaluation order cannot
//! affect results. With the `parallel` feature (default) tasks run on the
//! rayon pool; without it they run in a plain loop. Output order is the
//! input index order in both cases.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to every index in `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Sequential fallback; identical output to the parallel version.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential map with the same signature, always available. The benchmark
/// suite uses it to compare scheduling overhead against `map_indexed`, and
/// tests use it to confirm the two paths produce identical output.
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Number of worker threads `map_indexed` will actually use.
pub fn effective_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Configure the global thread pool size. No effect after the pool is
/// already initialized, or without the `parallel` feature.
pub fn set_workers(n: usize) {
    #[cfg(feature = "parallel")]
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}
