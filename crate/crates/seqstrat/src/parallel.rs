//! Worker-pool fan-out for split generation. Results are identical to the
//! sequential path for any worker count.

use rayon::prelude::*;
use seqstrat_core::pool::{carve_frozen_test, generate_candidate, rank_candidates, PoolConfig, RankedPool};
use seqstrat_core::segment::Segment;

use crate::{Error, Result};

/// Resolve the worker count: explicit value, else `SEQSTRAT_JOBS`, else all cores.
pub fn resolve_jobs(jobs: Option<usize>) -> usize {
    jobs.or_else(|| std::env::var("SEQSTRAT_JOBS").ok().and_then(|v| v.parse().ok()))
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} workers: {e}")))
}

/// Generate, score and rank a pool using `jobs` workers.
pub fn generate_pool(segments: &[Segment], config: &PoolConfig, jobs: usize) -> Result<RankedPool> {
    config.validate()?;
    let (frozen, working) = if config.frozen_test.is_empty() {
        (Vec::new(), segments.to_vec())
    } else {
        carve_frozen_test(segments, &config.frozen_test)?
    };
    let keys = config.candidate_keys();
    let candidates = thread_pool(jobs)?.install(|| {
        keys.par_iter()
            .map(|&(method, seed)| generate_candidate(&working, config, method, seed))
            .collect::<seqstrat_core::Result<Vec<_>>>()
    })?;
    let pool = rank_candidates(candidates, config, frozen)?;
    if pool.degenerate && pool.entries.len() > 1 {
        log::warn!("all {} candidate splits are identical", pool.entries.len());
    }
    Ok(pool)
}
