//! Bounded worker pool over replica indices. Results come back in index
//! order, so downstream merges are identical for every worker count.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// `f(0), …, f(count - 1)` computed on up to `workers` threads.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, _workers: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Wall-clock deadline shared by the stages of one run.
#[derive(Clone, Copy, Debug)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn after(limit: Option<Duration>) -> Self {
        Deadline(limit.map(|d| Instant::now() + d))
    }

    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn remaining(&self) -> Option<Duration> {
        self.0.map(|t| t.saturating_duration_since(Instant::now()))
    }

    pub fn check(&self, stage: &str) -> Result<()> {
        match self.0 {
            Some(t) if Instant::now() > t => {
                Err(Error::RuntimeCap(format!("wall-clock limit reached during {stage}")))
            }
            _ => Ok(()),
        }
    }
}

/// Worker count when none is configured.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
