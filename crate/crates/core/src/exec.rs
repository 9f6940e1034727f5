//! Batch execution, parallel when the `parallel` feature is enabled.
//!
//! Work is always split by index and merged by index, so the parallel
//! and sequential paths produce bit-identical output for deterministic
//! per-index functions. [`sequential`] forces the serial path at runtime,
//! which is how the benchmarks compare both on one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Run `f` with parallel dispatch disabled on the current thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    FORCE_SEQUENTIAL.with(|flag| {
        let prev = flag.replace(true);
        let out = f();
        flag.set(prev);
        out
    })
}

fn parallel_allowed() -> bool {
    !FORCE_SEQUENTIAL.with(Cell::get)
}

/// `(0..n).map(f)` collected in index order.
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_allowed() {
        return (0..n).into_par_iter().map(f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel_allowed();
    (0..n).map(f).collect()
}
