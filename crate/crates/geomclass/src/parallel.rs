//! Thread-pool executor.

use geomclass_core::exec::Executor;
use rayon::prelude::*;

pub const THREADS_ENV: &str = "GEOMCLASS_THREADS";

/// Runs jobs on a rayon pool; results keep job order.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(threads: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .expect("thread pool");
        Self { pool }
    }

    /// Sized by `GEOMCLASS_THREADS` when set to a positive integer, else the
    /// number of available cores.
    pub fn from_env() -> Self {
        Self::new(threads_from(std::env::var(THREADS_ENV).ok().as_deref()))
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

pub fn threads_from(var: Option<&str>) -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    match var.and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n,
        _ => cores,
    }
}

impl Executor for Parallel {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}
