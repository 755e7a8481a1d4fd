//! Execution policy for the data-parallel kernels.
//!
//! With the `parallel` feature (default) the kernels fan out over rayon's
//! global pool. Without it, [`Exec::Parallel`] silently runs sequentially so
//! callers never need their own `cfg` gates.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when this policy will actually use worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub(crate) fn map_collect<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

pub(crate) fn sort_dedup(exec: Exec, v: &mut Vec<u64>) {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        v.par_sort_unstable();
        v.dedup();
        return;
    }
    let _ = exec;
    v.sort_unstable();
    v.dedup();
}
