//! Execution strategy for the embarrassingly parallel loops (bootstrap
//! iterations, Monte Carlo trials, fold trainings).
//!
//! Every parallel loop goes through [`map_indices`], which always returns
//! results in index order. Combined with path-derived random streams this
//! makes outputs independent of the thread count. Without the `parallel`
//! feature everything runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when loops will actually be dispatched to the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0..len)` and collects the results in index order.
pub fn map_indices<T, F>(len: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Execution::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Runs `op` with parallel loops capped at `threads` workers.
///
/// `threads = None` uses the global pool. Without the `parallel` feature the
/// cap is ignored.
pub fn with_threads<R, F>(threads: Option<usize>, op: F) -> crate::Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(t) = threads {
            if t == 0 {
                return Err(crate::Error::argument("thread count must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| crate::Error::argument(format!("cannot build thread pool: {e}")))?;
            return Ok(pool.install(op));
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        if threads == Some(0) {
            return Err(crate::Error::argument("thread count must be at least 1"));
        }
    }
    Ok(op())
}
