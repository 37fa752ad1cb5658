//! Experiment orchestration: configuration, the round loop, traces and sweeps.

pub mod config;
pub mod run;
pub mod sweep;
pub mod trace;

use crate::error::{GoldError, Result};

/// Environment variable capping run-level parallelism.
pub const THREADS_ENV: &str = "GOLD_SIM_THREADS";

/// Worker count from `GOLD_SIM_THREADS`; `None` means one per core.
pub fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(GoldError::InvalidParams(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
            Ok(k) => Ok(Some(k)),
        },
        _ => Ok(None),
    }
}

pub(crate) fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = thread_count()? {
        builder = builder.num_threads(k);
    }
    builder
        .build()
        .map_err(|e| GoldError::InvalidParams(format!("cannot start worker pool: {e}")))
}
