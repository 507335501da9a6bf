//! Population dynamics: steady-state panmictic, cellular torus and island
//! ring, with optional online (rotating mini-batch) fitness.

mod cellular;
mod island;
mod log;
mod selection;
mod steady;

use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;

use crate::datasets::{Batch, BatchIterator, Dataset};
use crate::error::{GpError, Result};
use crate::genetic_ops::{OperatorTable, Variation};
use crate::learners::{Individual, LearnerKind};
use crate::scheduler::{rng_stream, EvalJob, GpRng, WorkerPool};
use crate::tree::{Sample, Tree};

pub use cellular::{step_cellular, CellularConfig, Neighborhood};
pub use island::{migrate, IslandConfig, Topology};
pub use log::{LogRow, RunLog, RUNLOG_HEADER};
pub use selection::{best_index, ranked, tournament_select, tournament_select_among, worst_index};
pub use steady::step_steady_state;

pub const DEFAULT_TOURNAMENT_SIZE: usize = 3;

/// Batch id used for the full training set in batched mode.
pub const FULL_BATCH_ID: u64 = 0;

/// Parameters shared by every dynamic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SteadyStateConfig {
    /// Total population (summed over islands).
    pub pop_size: usize,
    pub tournament_size: usize,
    pub generations: usize,
    /// Offspring only replace individuals they are not worse than.
    pub elitism: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    SteadyState,
    Cellular(CellularConfig),
    Island(IslandConfig),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub learner: LearnerKind,
    pub dynamics: Dynamics,
    pub pop_size: usize,
    pub tournament_size: usize,
    pub generations: usize,
    pub elitism: bool,
    /// Rotate through mini-batches of `batch_size` instead of using the full training set.
    pub online: bool,
    pub batch_size: Option<usize>,
    pub operators: OperatorTable,
    pub variation: Variation,
}

impl RunConfig {
    pub fn steady_state(&self) -> SteadyStateConfig {
        SteadyStateConfig {
            pop_size: self.pop_size,
            tournament_size: self.tournament_size,
            generations: self.generations,
            elitism: self.elitism,
        }
    }

    /// Size of the population a tournament draws from.
    fn deme_size(&self) -> usize {
        match self.dynamics {
            Dynamics::Island(isl) => isl.island_pop,
            _ => self.pop_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(GpError::Config("pop_size must be at least 2".into()));
        }
        if self.tournament_size < 2 || self.tournament_size > self.deme_size() {
            return Err(GpError::Config(format!(
                "tournament_size {} must be in 2..={}",
                self.tournament_size,
                self.deme_size()
            )));
        }
        match self.dynamics {
            Dynamics::SteadyState => {}
            Dynamics::Cellular(c) => c.validate(self.pop_size)?,
            Dynamics::Island(i) => i.validate(self.pop_size)?,
        }
        if self.online && self.batch_size.is_none() {
            return Err(GpError::Config("online mode needs batch_size".into()));
        }
        Ok(())
    }
}

/// Scores individuals on the current batch and counts sample evaluations.
pub struct Scorer<'a> {
    learner: LearnerKind,
    batch: &'a [&'a Sample],
    batch_id: u64,
    evaluations: u64,
}

impl<'a> Scorer<'a> {
    pub fn new(learner: LearnerKind, batch: &'a [&'a Sample], batch_id: u64) -> Self {
        Scorer {
            learner,
            batch,
            batch_id,
            evaluations: 0,
        }
    }

    pub fn batch_id(&self) -> u64 {
        self.batch_id
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Scores one individual on the calling thread.
    pub fn score(&mut self, ind: &mut Individual) -> Result<()> {
        let f = self.learner.fitness(ind.program(), self.batch)?;
        ind.set_fitness(f, self.batch_id);
        self.evaluations += self.batch.len() as u64;
        Ok(())
    }

    /// Scores every individual whose cache does not refer to this batch, on the pool.
    pub fn score_all(&mut self, pop: &mut [Individual], pool: &WorkerPool) -> Result<()> {
        let mut refs: Vec<&mut Individual> = pop.iter_mut().collect();
        self.score_refs(&mut refs, pool)
    }

    fn score_refs(&mut self, pop: &mut [&mut Individual], pool: &WorkerPool) -> Result<()> {
        let jobs: Vec<EvalJob> = pop
            .iter()
            .enumerate()
            .filter(|(_, ind)| ind.fitness_on(self.batch_id).is_none())
            .map(|(index, ind)| EvalJob {
                index,
                program: ind.program(),
                batch_id: self.batch_id,
            })
            .collect();
        let results = pool.evaluate_all(&jobs, self.learner, self.batch)?;
        self.evaluations += (results.len() * self.batch.len()) as u64;
        for r in results {
            pop[r.index].set_fitness(r.fitness, self.batch_id);
        }
        Ok(())
    }

    fn fork(&self) -> Scorer<'a> {
        Scorer::new(self.learner, self.batch, self.batch_id)
    }
}

/// Mutable state of one run.
pub struct RunState {
    pub generation: usize,
    /// One population, or one per island.
    pub populations: Vec<Vec<Individual>>,
    pub best_ever: Option<Individual>,
    pub batch: Batch,
    coordinator: GpRng,
    island_rngs: Vec<GpRng>,
    batches: Option<BatchIterator>,
    neighborhoods: Vec<Vec<usize>>,
    evaluations: u64,
}

impl RunState {
    /// Builds the initial population (ramped half-and-half) and draws the first batch.
    pub fn new(cfg: &RunConfig, data: &Dataset, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if data.input_size() != cfg.variation.tree.input_size {
            return Err(GpError::Config(format!(
                "input_vector_size {} does not match dataset width {}",
                cfg.variation.tree.input_size,
                data.input_size()
            )));
        }
        let train = data.train_indices();
        if train.is_empty() {
            return Err(GpError::Config("training split is empty".into()));
        }
        let mut root = rng_stream(seed, 0);
        let mut coordinator = rng_stream(root.next_u64(), 0);
        let batch_seed = root.next_u64();
        let (batches, batch) = match (cfg.online, cfg.batch_size) {
            (true, Some(bs)) => {
                let mut it = BatchIterator::new(train, bs, batch_seed, FULL_BATCH_ID + 1)?;
                let b = it.next_batch();
                (Some(it), b)
            }
            _ => {
                if let Some(bs) = cfg.batch_size {
                    if bs > train.len() {
                        return Err(GpError::Config(format!(
                            "batch size {bs} exceeds training split {}",
                            train.len()
                        )));
                    }
                }
                let mut indices = train.to_vec();
                indices.sort_unstable();
                (
                    None,
                    Batch {
                        id: FULL_BATCH_ID,
                        indices,
                    },
                )
            }
        };

        let trees = cfg
            .variation
            .tree
            .ramped_half_and_half(&mut coordinator, cfg.pop_size);
        let mut individuals: Vec<Individual> = trees.into_iter().map(Individual::new).collect();
        let (populations, island_rngs) = match cfg.dynamics {
            Dynamics::Island(isl) => {
                let mut pops = Vec::with_capacity(isl.n_islands);
                for _ in 0..isl.n_islands {
                    let rest = individuals.split_off(isl.island_pop);
                    pops.push(std::mem::replace(&mut individuals, rest));
                }
                let rngs = (0..isl.n_islands)
                    .map(|_| rng_stream(root.next_u64(), 0))
                    .collect();
                (pops, rngs)
            }
            _ => (vec![individuals], Vec::new()),
        };
        let neighborhoods = match cfg.dynamics {
            Dynamics::Cellular(c) => c.neighborhoods(),
            _ => Vec::new(),
        };
        Ok(RunState {
            generation: 0,
            populations,
            best_ever: None,
            batch,
            coordinator,
            island_rngs,
            batches,
            neighborhoods,
            evaluations: 0,
        })
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Scores every individual whose cache is stale for the current batch.
    fn refresh(&mut self, cfg: &RunConfig, batch: &[&Sample], pool: &WorkerPool) -> Result<()> {
        let mut scorer = Scorer::new(cfg.learner, batch, self.batch.id);
        let mut all: Vec<&mut Individual> = self.populations.iter_mut().flatten().collect();
        scorer.score_refs(&mut all, pool)?;
        self.evaluations += scorer.evaluations();
        Ok(())
    }

    /// Advances one generation on the current batch.
    fn step(&mut self, cfg: &RunConfig, batch: &[&Sample], pool: &WorkerPool) -> Result<()> {
        let mut scorer = Scorer::new(cfg.learner, batch, self.batch.id);
        match cfg.dynamics {
            Dynamics::SteadyState => {
                step_steady_state(
                    &mut self.coordinator,
                    &mut self.populations[0],
                    cfg,
                    &mut scorer,
                )?;
            }
            Dynamics::Cellular(_) => {
                step_cellular(
                    &mut self.coordinator,
                    &mut self.populations[0],
                    &self.neighborhoods,
                    cfg,
                    &mut scorer,
                    pool,
                )?;
            }
            Dynamics::Island(isl) => {
                let base = scorer.fork();
                let counts: Vec<u64> = pool.install(|| {
                    self.populations
                        .par_iter_mut()
                        .zip(self.island_rngs.par_iter_mut())
                        .map(|(pop, rng)| {
                            let mut s = base.fork();
                            step_steady_state(rng, pop, cfg, &mut s)?;
                            Ok(s.evaluations())
                        })
                        .collect::<Result<Vec<u64>>>()
                })?;
                scorer.evaluations += counts.iter().sum::<u64>();
                if (self.generation + 1).is_multiple_of(isl.migration_interval) {
                    migrate(&mut self.populations, &isl);
                }
            }
        }
        self.evaluations += scorer.evaluations();
        self.generation += 1;
        Ok(())
    }

    /// Best individual of the current generation across all populations.
    pub fn current_best(&self) -> &Individual {
        self.populations
            .iter()
            .map(|p| &p[best_index(p)])
            .min_by(|a, b| {
                a.fitness()
                    .unwrap_or(f64::INFINITY)
                    .total_cmp(&b.fitness().unwrap_or(f64::INFINITY))
                    .then(a.size().cmp(&b.size()))
            })
            .expect("at least one population")
    }

    fn mean_fitness(&self) -> f64 {
        let n = self.populations.iter().map(Vec::len).sum::<usize>() as f64;
        self.populations
            .iter()
            .flatten()
            .map(|i| i.fitness().unwrap_or(f64::MAX) / n)
            .sum()
    }

    fn record(&mut self, cfg: &RunConfig, test: &[&Sample], started: Instant) -> Result<LogRow> {
        let best = self.current_best().clone();
        let best_test = if test.is_empty() {
            f64::NAN
        } else {
            cfg.learner.test_metric(best.program(), test)?
        };
        let row = LogRow {
            generation: self.generation,
            best_train: best.fitness().expect("scored"),
            best_test,
            mean_fitness: self.mean_fitness(),
            evaluations: self.evaluations,
            elapsed_s: started.elapsed().as_secs_f64(),
        };
        let improves = match &self.best_ever {
            Some(b) => best.fitness() <= b.fitness(),
            None => true,
        };
        if improves {
            self.best_ever = Some(best);
        }
        Ok(row)
    }

    fn advance_batch(&mut self) -> bool {
        match self.batches.as_mut() {
            Some(it) => {
                self.batch = it.next_batch();
                true
            }
            None => false,
        }
    }
}

/// Final result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: RunLog,
    /// Best individual of the last generation.
    pub best: Tree,
    pub best_train: f64,
    pub final_test: f64,
}

/// Evolves for `cfg.generations` generations and logs one row per generation
/// (row 0 is the initial population). The log is a pure function of
/// `(cfg, data, seed)` apart from `elapsed_s`.
pub fn run(cfg: &RunConfig, data: &Dataset, pool: &WorkerPool, seed: u64) -> Result<RunOutcome> {
    let started = Instant::now();
    let mut state = RunState::new(cfg, data, seed)?;
    let test = data.test_samples();
    let mut log = RunLog::default();

    let mut batch = data.select(&state.batch.indices);
    state.refresh(cfg, &batch, pool)?;
    log.rows.push(state.record(cfg, &test, started)?);

    for _ in 0..cfg.generations {
        if state.advance_batch() {
            batch = data.select(&state.batch.indices);
            state.refresh(cfg, &batch, pool)?;
        }
        state.step(cfg, &batch, pool)?;
        log.rows.push(state.record(cfg, &test, started)?);
    }

    let best = state.current_best();
    let last = log.last().expect("initial row");
    Ok(RunOutcome {
        best: best.tree().clone(),
        best_train: last.best_train,
        final_test: last.best_test,
        log,
    })
}
