//! Execution strategy for embarrassingly parallel loops.
//!
//! The crate itself is single-threaded; callers with a thread pool implement
//! [`Executor`] and hand it to the collection and training routines. Results
//! are always gathered in index order, so outputs are identical whatever the
//! executor.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluate `f(i)` for `i in 0..n` and return the results in index order.
    fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
