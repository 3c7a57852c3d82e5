//! Worker-pool sizing. Results never depend on the worker count: parallel
//! work always writes into index-addressed slots and reductions run in a
//! fixed order.

use rayon::ThreadPool;

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "SKEWCAST_THREADS";

/// Worker count from `SKEWCAST_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

pub fn pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Run `f` on a pool capped at `threads` workers (env var when `None`).
pub fn install<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = match threads {
        Some(n) => Some(n),
        None => threads_from_env()?,
    };
    Ok(pool(threads)?.install(f))
}
