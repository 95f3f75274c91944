//! Execution backend selection for the data-parallel loops.
//!
//! Workloads here are embarrassingly parallel over independent indices
//! (Monte Carlo paths, per-`eps` solves). To keep results bitwise
//! reproducible regardless of scheduling, parallel execution always
//! materializes per-index results in index order and reduces sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which backend runs an indexed batch.
///
/// With the `parallel` feature disabled, `Parallel` silently degrades to
/// sequential execution so callers need no cfg knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Parallel,
    Sequential,
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}

/// Fallible variant of [`map_indexed`]; the first error (by index) wins.
pub fn try_map_indexed<T, E, F>(mode: ExecMode, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                let results: Vec<Result<T, E>> = (0..n).into_par_iter().map(f).collect();
                results.into_iter().collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}
