//! Seeded random streams and the evaluation worker pool.
//!
//! Workers only ever run pure fitness evaluations. Every random decision is
//! taken by the coordinator (or by an island on its own stream), so results
//! do not depend on the number of workers.

use std::borrow::Borrow;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GpError, Result};
use crate::learners::LearnerKind;
use crate::tree::{LinearProgram, Sample};

pub type GpRng = ChaCha8Rng;

/// Independent reproducible sub-stream `stream_id` of `master_seed`.
///
/// ChaCha's 64-bit stream counter is used as the split, so streams never
/// share keystream blocks.
pub fn rng_stream(master_seed: u64, stream_id: u64) -> GpRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Hardware parallelism, falling back to 1.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[derive(Debug, Clone, Copy)]
pub struct EvalJob<'a> {
    pub index: usize,
    pub program: &'a LinearProgram,
    pub batch_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub index: usize,
    pub fitness: f64,
}

pub struct WorkerPool {
    pool: rayon::ThreadPool,
    n_workers: usize,
}

impl WorkerPool {
    pub fn new(n_workers: usize) -> Result<Self> {
        if n_workers == 0 {
            return Err(GpError::Config("n_jobs must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n_workers)
            .thread_name(|i| format!("gp-eval-{i}"))
            .build()
            .map_err(|e| GpError::Worker(e.to_string()))?;
        Ok(WorkerPool { pool, n_workers })
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    /// Scores every job on `batch`. Results come back in job order whatever
    /// order workers finish in; any failure aborts the whole call.
    pub fn evaluate_all<S: Borrow<Sample> + Sync>(
        &self,
        jobs: &[EvalJob<'_>],
        learner: LearnerKind,
        batch: &[S],
    ) -> Result<Vec<EvalResult>> {
        if jobs.is_empty() {
            return Ok(Vec::new());
        }
        self.pool.install(|| {
            jobs.par_iter()
                .map(|job| {
                    let fitness =
                        catch_unwind(AssertUnwindSafe(|| learner.fitness(job.program, batch)))
                            .map_err(|panic| {
                            let msg = panic
                                .downcast_ref::<&str>()
                                .map(|s| s.to_string())
                                .or_else(|| panic.downcast_ref::<String>().cloned())
                                .unwrap_or_else(|| "unknown panic".into());
                            GpError::Worker(format!("job {}: {msg}", job.index))
                        })??;
                    Ok(EvalResult {
                        index: job.index,
                        fitness,
                    })
                })
                .collect()
        })
    }

    /// Runs `f` inside the pool so nested rayon work uses these workers.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::PrimitiveSet;
    use crate::tree::TreeConfig;
    use rand::{Rng, RngCore};

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = rng_stream(42, 0);
            (0..10_000).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = rng_stream(42, 0);
            (0..10_000).map(|_| r.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut r = rng_stream(42, 1);
            (0..10_000).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        let shared = a.iter().zip(&c).filter(|(x, y)| x == y).count();
        assert_eq!(shared, 0);
    }

    fn programs(n: usize) -> Vec<LinearProgram> {
        let cfg = TreeConfig::new(PrimitiveSet::default(), 5, 6).unwrap();
        let mut rng = rng_stream(3, 0);
        cfg.ramped_half_and_half(&mut rng, n)
            .iter()
            .map(|t| t.compile())
            .collect()
    }

    fn batch() -> Vec<Sample> {
        let mut rng = rng_stream(4, 0);
        (0..64)
            .map(|_| {
                let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
                Sample::new(x, rng.random_range(-1.0..1.0))
            })
            .collect()
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let progs = programs(500);
        let jobs: Vec<EvalJob> = progs
            .iter()
            .enumerate()
            .map(|(index, program)| EvalJob {
                index,
                program,
                batch_id: 0,
            })
            .collect();
        let data = batch();
        let one = WorkerPool::new(1).unwrap();
        let eight = WorkerPool::new(8).unwrap();
        let a = one
            .evaluate_all(&jobs, LearnerKind::RegressorLS, &data)
            .unwrap();
        let b = eight
            .evaluate_all(&jobs, LearnerKind::RegressorLS, &data)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_job_yields_one_result() {
        let progs = programs(1000);
        let jobs: Vec<EvalJob> = progs
            .iter()
            .enumerate()
            .map(|(index, program)| EvalJob {
                index,
                program,
                batch_id: 0,
            })
            .collect();
        let out = WorkerPool::new(3)
            .unwrap()
            .evaluate_all(&jobs, LearnerKind::Denoiser, &batch())
            .unwrap();
        assert_eq!(out.len(), 1000);
        assert!(out.iter().enumerate().all(|(i, r)| r.index == i));
        let empty = WorkerPool::new(2)
            .unwrap()
            .evaluate_all(&[], LearnerKind::Denoiser, &batch())
            .unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn failure_aborts_the_call() {
        let progs = programs(4);
        let jobs: Vec<EvalJob> = progs
            .iter()
            .enumerate()
            .map(|(index, program)| EvalJob {
                index,
                program,
                batch_id: 0,
            })
            .collect();
        let empty: Vec<Sample> = Vec::new();
        assert!(WorkerPool::new(2)
            .unwrap()
            .evaluate_all(&jobs, LearnerKind::RegressorLS, &empty)
            .is_err());
        // features beyond the sample width panic inside a worker
        let narrow = vec![Sample::new(vec![0.0], 0.0)];
        let p = crate::tree::Tree::parse("x4", Some(2)).unwrap().compile();
        let job = [EvalJob {
            index: 0,
            program: &p,
            batch_id: 0,
        }];
        let err = WorkerPool::new(2)
            .unwrap()
            .evaluate_all(&job, LearnerKind::RegressorLS, &narrow)
            .unwrap_err();
        assert!(matches!(err, GpError::Worker(_)));
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(WorkerPool::new(0).is_err());
    }
}
