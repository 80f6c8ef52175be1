//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (on by default) independent tasks are spread
//! over the rayon pool. Without it, or when [`Execution::Sequential`] is
//! requested, the same closures run in index order on the calling thread.
//! Results are always returned in index order, so outputs do not depend on
//! the execution mode.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// True when tasks will actually be dispatched to a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Sizes the global worker pool. `0` keeps one thread per core. Has no
/// effect without the `parallel` feature or once the pool is running.
pub fn init_threads(jobs: usize) {
    #[cfg(feature = "parallel")]
    if jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            log::debug!("worker pool already initialized: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<R, F>(n: usize, exec: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Like [`map_indexed`] over a slice.
pub fn map_slice<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_indexed(items.len(), exec, |i| f(&items[i]))
}
