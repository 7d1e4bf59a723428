//! Parallel execution of simulation studies.
//!
//! Jobs carry their own seeds and `summarize` consumes outcomes in job
//! order, so collecting an indexed parallel iterator gives exactly the
//! sequential table whatever the thread count.

use anyhow::Result;
use quilt_core::simlab::Study;
use rayon::prelude::*;

/// Runs every job on the current rayon pool.
pub fn run_parallel<S>(study: &S) -> Result<S::Table>
where
    S: Study + Sync,
{
    let outcomes: Vec<S::Outcome> = study.jobs().par_iter().map(|j| study.run_job(j)).collect();
    Ok(study.summarize(outcomes)?)
}

/// As [`run_parallel`] on a dedicated pool; `threads = 0` lets rayon decide.
pub fn run_with_threads<S>(study: &S, threads: usize) -> Result<S::Table>
where
    S: Study + Sync,
    S::Table: Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| run_parallel(study))
}
