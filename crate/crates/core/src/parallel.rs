//! Data-parallel maps over independent evaluation points.
//!
//! Work runs on the global rayon pool, whose size the CLI bounds with
//! `--threads`. Each element is computed independently, so results do not
//! depend on the number of workers.

use rayon::prelude::*;

use crate::error::Result;

pub(crate) fn map<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    items.par_iter().map(f).collect()
}

pub(crate) fn map_infallible<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Bounds the global worker pool. Only the first call takes effect.
pub fn set_threads(threads: usize) -> bool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build_global()
        .is_ok()
}
