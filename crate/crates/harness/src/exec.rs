use advgrasp_core::exec::Executor;
use rayon::prelude::*;

/// Fans loops out over the rayon pool. Results come back in index order, so
/// runs are identical to sequential ones.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl Executor for RayonExecutor {
    fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}
