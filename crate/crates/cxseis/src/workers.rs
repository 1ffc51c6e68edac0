//! Worker-pool management.
//!
//! All parallel sections run inside a shared rayon pool whose size is
//! `CXSEIS_WORKERS` when set, otherwise the machine core count. Every
//! parallel kernel writes disjoint output slices and performs its
//! reductions in a fixed order, so results are bit-identical for any
//! worker count.

use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

pub const WORKERS_ENV: &str = "CXSEIS_WORKERS";

static POOL: OnceLock<ThreadPool> = OnceLock::new();

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Number of workers the shared pool uses.
pub fn worker_count() -> usize {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.parse::<usize>().ok().filter(|&n| n >= 1).unwrap_or_else(default_workers),
        Err(_) => default_workers(),
    }
}

/// The shared pool. Built once, on first use.
pub fn pool() -> &'static ThreadPool {
    POOL.get_or_init(|| {
        ThreadPoolBuilder::new()
            .num_threads(worker_count())
            .build()
            .expect("failed to build worker pool")
    })
}

/// Runs `f` inside the shared pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    pool().install(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_var_caps_worker_count() {
        std::env::set_var(WORKERS_ENV, "3");
        assert_eq!(worker_count(), 3);
        std::env::set_var(WORKERS_ENV, "0");
        assert_eq!(worker_count(), default_workers());
        std::env::remove_var(WORKERS_ENV);
        assert_eq!(worker_count(), default_workers());
    }
}
