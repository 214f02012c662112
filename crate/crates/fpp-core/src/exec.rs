//! Execution strategy for the data-parallel inner loops.
//!
//! Everything that is embarrassingly parallel (per-edge sampling, replica
//! sweeps) goes through these helpers. With the `parallel` feature (the
//! default) they fan out on rayon; without it they run sequentially. The
//! sequential bodies are always compiled so the bench suite can compare
//! the two paths directly. Results never depend on the thread count:
//! work items are pure functions of their index.

/// Pin the global worker count (CLI `--jobs`). Returns false when the
/// pool was already initialized or the build is sequential-only.
pub fn configure_jobs(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

pub fn fill_indexed_seq<T, F>(out: &mut [T], f: F)
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

#[cfg(feature = "parallel")]
pub fn fill_indexed_par<T, F>(out: &mut [T], f: F)
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    use rayon::prelude::*;
    out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
}

/// Fill `out[i] = f(i)`, parallel when the feature is enabled.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    #[cfg(feature = "parallel")]
    {
        fill_indexed_par(out, f);
    }
    #[cfg(not(feature = "parallel"))]
    {
        fill_indexed_seq(out, f);
    }
}

pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed_par<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Collect `f(0..n)` in index order, parallel when the feature is enabled.
/// Replica sweeps use this; merging by index keeps outputs deterministic.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    #[cfg(feature = "parallel")]
    {
        map_indexed_par(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}
