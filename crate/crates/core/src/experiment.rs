//! Experiment configuration files, repeated seeded runs, and paired comparison
//! of two experiments' summaries.
//!
//! Configuration is JSON. Keys follow the constructor arguments of the
//! scikit-style `GeneticProgram` front end (`individual_class`, `lowlevel`,
//! `ind_params`, `operations`, `operations_prob`, `operations_arity`,
//! `pop_size`, `generations`, `pop_dynamics`, `online`, `minimization`,
//! `n_jobs`) plus dataset and repetition settings. See `configs/` for
//! complete examples.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{gen_keijzer12, gen_noisy_patches, load_csv, CsvOptions, Dataset};
use crate::error::{GpError, Result};
use crate::genetic_ops::{OperatorTable, Variation, DEFAULT_SIGMA};
use crate::learners::LearnerKind;
use crate::population::{
    self, CellularConfig, Dynamics, IslandConfig, Neighborhood, RunConfig, RunOutcome, Topology,
    DEFAULT_TOURNAMENT_SIZE,
};
use crate::primitives::PrimitiveSet;
use crate::scheduler::{default_workers, rng_stream, WorkerPool};
use crate::tree::{TreeConfig, WindowPolicy};

pub const SUMMARY_HEADER: &str = "setup,rep,metric,final_train,final_test,evaluations,elapsed_s";
pub const AGGREGATE_HEADER: &str =
    "setup,metric,reps,median_test,mean_test,median_elapsed_s,mean_elapsed_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndParams {
    pub input_vector_size: usize,
    /// Maximum tree depth.
    pub complexity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellularSpec {
    pub grid_w: usize,
    pub grid_h: usize,
    #[serde(default = "default_neighborhood")]
    pub neighborhood: Neighborhood,
    #[serde(default = "one")]
    pub radius: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IslandSpec {
    pub n_islands: usize,
    #[serde(default)]
    pub migration_interval: Option<usize>,
    #[serde(default)]
    pub n_migrants: Option<usize>,
    #[serde(default)]
    pub topology: Topology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Tabular CSV; relative paths resolve against the config file's directory.
    Csv {
        path: PathBuf,
        label: String,
        #[serde(default)]
        n_train: Option<usize>,
        #[serde(default)]
        split_seed: u64,
        #[serde(default = "yes")]
        standardize: bool,
    },
    Keijzer12 {
        n_train: usize,
        n_test: usize,
        #[serde(default = "keijzer_lo")]
        lo: f64,
        #[serde(default = "keijzer_hi")]
        hi: f64,
        #[serde(default)]
        data_seed: u64,
    },
    NoisyPatches {
        n_train: usize,
        n_test: usize,
        patch_side: usize,
        sigma: f64,
        #[serde(default)]
        data_seed: u64,
    },
}

fn default_neighborhood() -> Neighborhood {
    Neighborhood::VonNeumann
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn keijzer_lo() -> f64 {
    -3.0
}
fn keijzer_hi() -> f64 {
    3.0
}
fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}
fn default_tournament() -> usize {
    DEFAULT_TOURNAMENT_SIZE
}
fn default_reps() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// `RegressorLS`, `BinaryClassifier` or `Denoiser`.
    pub individual_class: String,
    pub lowlevel: Vec<String>,
    #[serde(default)]
    pub mezzanine: Vec<String>,
    pub ind_params: IndParams,
    #[serde(default)]
    pub vector_windows: WindowPolicy,
    pub operations: Vec<String>,
    pub operations_prob: Vec<f64>,
    pub operations_arity: Vec<usize>,
    #[serde(default = "default_sigma")]
    pub numeric_sigma: f64,
    pub pop_size: usize,
    pub generations: usize,
    /// `Steady_State`, `Cellular` or `Island`.
    pub pop_dynamics: String,
    #[serde(default)]
    pub cellular: Option<CellularSpec>,
    #[serde(default)]
    pub islands: Option<IslandSpec>,
    #[serde(default = "default_tournament")]
    pub tournament_size: usize,
    #[serde(default = "yes")]
    pub elitism: bool,
    pub online: bool,
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub minimization: bool,
    #[serde(default)]
    pub n_jobs: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    pub dataset: DatasetSpec,
}

impl ExperimentConfig {
    /// Parses a config; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                GpError::Config(inner.to_string())
            } else {
                GpError::Config(format!("{path}: {inner}"))
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| GpError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            GpError::Config(msg) => GpError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn learner(&self) -> Result<LearnerKind> {
        self.individual_class.parse()
    }

    /// Validated run parameters (everything except the dataset).
    pub fn run_config(&self) -> Result<RunConfig> {
        let learner = self.learner()?;
        if self.minimization != learner.minimization() {
            return Err(GpError::Config(format!(
                "minimization: {} minimizes its fitness, got {}",
                learner, self.minimization
            )));
        }
        let primitives = PrimitiveSet::from_ids(&self.lowlevel, &self.mezzanine)?;
        let tree = TreeConfig::new(
            primitives,
            self.ind_params.input_vector_size,
            self.ind_params.complexity,
        )?
        .with_windows(self.vector_windows.clone())?;
        let operators = OperatorTable::from_lists(
            &self.operations,
            &self.operations_prob,
            &self.operations_arity,
        )?;
        let variation = Variation::new(tree, self.numeric_sigma)?;
        let dynamics = match self.pop_dynamics.as_str() {
            "Steady_State" => Dynamics::SteadyState,
            "Cellular" => {
                let c = self.cellular.as_ref().ok_or_else(|| {
                    GpError::Config("pop_dynamics Cellular needs a 'cellular' section".into())
                })?;
                Dynamics::Cellular(CellularConfig {
                    grid_w: c.grid_w,
                    grid_h: c.grid_h,
                    neighborhood: c.neighborhood,
                    radius: c.radius,
                })
            }
            "Island" => {
                let s = self.islands.as_ref().ok_or_else(|| {
                    GpError::Config("pop_dynamics Island needs an 'islands' section".into())
                })?;
                if s.n_islands == 0 || !self.pop_size.is_multiple_of(s.n_islands) {
                    return Err(GpError::Config(format!(
                        "islands.n_islands {} must divide pop_size {}",
                        s.n_islands, self.pop_size
                    )));
                }
                let mut isl = IslandConfig::with_defaults(s.n_islands, self.pop_size / s.n_islands);
                if let Some(m) = s.migration_interval {
                    isl.migration_interval = m;
                }
                if let Some(m) = s.n_migrants {
                    isl.n_migrants = m;
                }
                isl.topology = s.topology;
                Dynamics::Island(isl)
            }
            other => {
                return Err(GpError::Config(format!(
                    "pop_dynamics: unknown value '{other}' (Steady_State, Cellular, Island)"
                )))
            }
        };
        if self.repetitions == 0 {
            return Err(GpError::Config("repetitions must be at least 1".into()));
        }
        let cfg = RunConfig {
            learner,
            dynamics,
            pop_size: self.pop_size,
            tournament_size: self.tournament_size,
            generations: self.generations,
            elitism: self.elitism,
            online: self.online,
            batch_size: self.batch_size,
            operators,
            variation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads or generates the dataset. Relative CSV paths resolve against `base_dir`.
    pub fn dataset(&self, base_dir: &Path) -> Result<Dataset> {
        let learner = self.learner()?;
        let data = match &self.dataset {
            DatasetSpec::Csv {
                path,
                label,
                n_train,
                split_seed,
                standardize,
            } => {
                let mut opts = CsvOptions::new(label.clone(), learner);
                opts.n_train = *n_train;
                opts.split_seed = *split_seed;
                opts.standardize = *standardize;
                load_csv(base_dir.join(path), &opts)?
            }
            DatasetSpec::Keijzer12 {
                n_train,
                n_test,
                lo,
                hi,
                data_seed,
            } => {
                let train = gen_keijzer12(*n_train, *data_seed, *lo, *hi)?;
                let test = gen_keijzer12(*n_test, data_seed.wrapping_add(1), *lo, *hi)?;
                train.with_test(test)?
            }
            DatasetSpec::NoisyPatches {
                n_train,
                n_test,
                patch_side,
                sigma,
                data_seed,
            } => {
                let train = gen_noisy_patches(*n_train, *patch_side, *sigma, *data_seed)?;
                let test =
                    gen_noisy_patches(*n_test, *patch_side, *sigma, data_seed.wrapping_add(1))?;
                train.with_test(test)?
            }
        };
        if data.task() != learner {
            return Err(GpError::Config(format!(
                "dataset provides {} samples but individual_class is {learner}",
                data.task()
            )));
        }
        Ok(data)
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub reps: Option<usize>,
    pub parallel_reps: bool,
}

/// Seed of repetition `rep`: the first draw of stream `rep` of the master seed.
pub fn repetition_seed(master_seed: u64, rep: usize) -> u64 {
    rng_stream(master_seed, rep as u64).next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    pub rep: usize,
    pub final_train: f64,
    pub final_test: f64,
    pub evaluations: u64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub setup: String,
    pub metric: String,
    pub reps: Vec<RepResult>,
}

impl ExperimentSummary {
    pub fn median_test(&self) -> f64 {
        median(self.reps.iter().map(|r| r.final_test).collect())
    }

    pub fn mean_test(&self) -> f64 {
        mean(self.reps.iter().map(|r| r.final_test))
    }

    pub fn median_elapsed(&self) -> f64 {
        median(self.reps.iter().map(|r| r.elapsed_s).collect())
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SUMMARY_HEADER}")?;
        for r in &self.reps {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.6}",
                self.setup,
                r.rep,
                self.metric,
                r.final_train,
                r.final_test,
                r.evaluations,
                r.elapsed_s
            )?;
        }
        Ok(())
    }

    pub fn write_aggregate<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{AGGREGATE_HEADER}")?;
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6}",
            self.setup,
            self.metric,
            self.reps.len(),
            self.median_test(),
            self.mean_test(),
            self.median_elapsed(),
            mean(self.reps.iter().map(|r| r.elapsed_s)),
        )?;
        Ok(())
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

/// Runs every repetition of `cfg` and returns the per-run outcomes in
/// repetition order. Output does not depend on `jobs` or `parallel_reps`.
pub fn run_repetitions(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    overrides: &Overrides,
) -> Result<Vec<RunOutcome>> {
    let run_cfg = cfg.run_config()?;
    let data = cfg.dataset(base_dir)?;
    let master = overrides.seed.unwrap_or(cfg.seed);
    let reps = overrides.reps.unwrap_or(cfg.repetitions);
    if reps == 0 {
        return Err(GpError::Config("repetitions must be at least 1".into()));
    }
    let jobs = overrides
        .jobs
        .or(cfg.n_jobs)
        .unwrap_or_else(default_workers);
    let pool = WorkerPool::new(jobs)?;
    let one = |rep: usize| population::run(&run_cfg, &data, &pool, repetition_seed(master, rep));
    if overrides.parallel_reps {
        pool.install(|| (0..reps).into_par_iter().map(one).collect())
    } else {
        (0..reps).map(one).collect()
    }
}

/// Runs the experiment described by the config at `config_path`, writing
/// `run_<i>.csv`, `run_<i>_best.txt`, `summary.csv` and `aggregate.csv` into `out_dir`.
pub fn run_experiment(
    config_path: &Path,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<ExperimentSummary> {
    let cfg = ExperimentConfig::load(config_path)?;
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let outcomes = run_repetitions(&cfg, base_dir, overrides)?;
    let learner = cfg.learner()?;
    let mut reps = Vec::with_capacity(outcomes.len());
    for (i, out) in outcomes.iter().enumerate() {
        out.log.save(out_dir.join(format!("run_{i}.csv")))?;
        fs::write(
            out_dir.join(format!("run_{i}_best.txt")),
            format!("{}\n", out.best),
        )?;
        let last = out.log.last().expect("initial row");
        reps.push(RepResult {
            rep: i,
            final_train: out.best_train,
            final_test: out.final_test,
            evaluations: last.evaluations,
            elapsed_s: last.elapsed_s,
        });
    }
    let summary = ExperimentSummary {
        setup: cfg.name.clone(),
        metric: learner.metric_name().to_string(),
        reps,
    };
    summary.write_summary(fs::File::create(out_dir.join("summary.csv"))?)?;
    summary.write_aggregate(fs::File::create(out_dir.join("aggregate.csv"))?)?;
    log_line(&summary, started.elapsed().as_secs_f64());
    Ok(summary)
}

fn log_line(summary: &ExperimentSummary, total_s: f64) {
    println!(
        "{}: {} run(s), median final test {} = {}, total time {:.2}s",
        summary.setup,
        summary.reps.len(),
        summary.metric,
        summary.median_test(),
        total_s
    );
}

/// Reads a `summary.csv` written by [`run_experiment`].
pub fn read_summary(path: impl AsRef<Path>) -> Result<ExperimentSummary> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != SUMMARY_HEADER {
        return Err(GpError::Usage(format!(
            "{}: not a summary file (header must be '{SUMMARY_HEADER}')",
            path.display()
        )));
    }
    let mut setup = String::new();
    let mut metric = String::new();
    let mut reps = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            record[i].parse().map_err(|_| GpError::Load {
                path: path.to_path_buf(),
                row: record.position().map(|p| p.line() as usize).unwrap_or(0),
                column: headers[i].to_string(),
                msg: format!("non-numeric cell '{}'", &record[i]),
            })
        };
        setup = record[0].to_string();
        metric = record[2].to_string();
        reps.push(RepResult {
            rep: field(1)? as usize,
            final_train: field(3)?,
            final_test: field(4)?,
            evaluations: field(5)? as u64,
            elapsed_s: field(6)?,
        });
    }
    Ok(ExperimentSummary {
        setup,
        metric,
        reps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub rep: usize,
    pub test_a: f64,
    pub test_b: f64,
    pub elapsed_a: f64,
    pub elapsed_b: f64,
}

/// Paired per-repetition comparison of two experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub setup_a: String,
    pub setup_b: String,
    pub metric: String,
    pub higher_is_better: bool,
    pub rows: Vec<PairRow>,
    /// Median of `test_a - test_b`.
    pub median_test_delta: f64,
    /// Median of `elapsed_a - elapsed_b`.
    pub median_elapsed_delta: f64,
    /// Median of `elapsed_a / elapsed_b`.
    pub median_runtime_ratio: f64,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    /// Two-sided sign test over non-tied pairs.
    pub sign_test_p: f64,
}

pub fn compare(a: &ExperimentSummary, b: &ExperimentSummary) -> Result<Comparison> {
    if a.reps.len() != b.reps.len() {
        return Err(GpError::Usage(format!(
            "repetition counts differ: {} has {}, {} has {}",
            a.setup,
            a.reps.len(),
            b.setup,
            b.reps.len()
        )));
    }
    if a.metric != b.metric {
        return Err(GpError::Usage(format!(
            "metrics differ: {} vs {}",
            a.metric, b.metric
        )));
    }
    let higher_is_better = a.metric == LearnerKind::BinaryClassifier.metric_name();
    let rows: Vec<PairRow> = a
        .reps
        .iter()
        .zip(&b.reps)
        .map(|(x, y)| PairRow {
            rep: x.rep,
            test_a: x.final_test,
            test_b: y.final_test,
            elapsed_a: x.elapsed_s,
            elapsed_b: y.elapsed_s,
        })
        .collect();
    let (mut wins_a, mut wins_b, mut ties) = (0, 0, 0);
    for r in &rows {
        let a_better = if higher_is_better {
            r.test_a > r.test_b
        } else {
            r.test_a < r.test_b
        };
        if r.test_a == r.test_b {
            ties += 1;
        } else if a_better {
            wins_a += 1;
        } else {
            wins_b += 1;
        }
    }
    Ok(Comparison {
        setup_a: a.setup.clone(),
        setup_b: b.setup.clone(),
        metric: a.metric.clone(),
        higher_is_better,
        median_test_delta: median(rows.iter().map(|r| r.test_a - r.test_b).collect()),
        median_elapsed_delta: median(rows.iter().map(|r| r.elapsed_a - r.elapsed_b).collect()),
        median_runtime_ratio: median(
            rows.iter()
                .map(|r| {
                    if r.elapsed_b > 0.0 {
                        r.elapsed_a / r.elapsed_b
                    } else {
                        f64::NAN
                    }
                })
                .collect(),
        ),
        sign_test_p: sign_test(wins_a, wins_b),
        wins_a,
        wins_b,
        ties,
        rows,
    })
}

/// Two-sided exact sign test p-value for `wins` vs `losses` (ties excluded).
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.min(losses);
    // ln C(n, i) accumulated incrementally
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_c = 0.0f64;
    let mut tail = 0.0f64;
    for i in 0..=k {
        if i > 0 {
            ln_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        tail += (ln_c + ln_half_n).exp();
    }
    (2.0 * tail).min(1.0)
}

impl Comparison {
    pub fn write_report<W: Write>(&self, mut out: W) -> Result<()> {
        let delta_name = if self.higher_is_better {
            "accuracy_delta"
        } else {
            "error_delta"
        };
        writeln!(
            out,
            "rep,test_a,test_b,{delta_name},elapsed_a,elapsed_b,runtime_ratio"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                r.rep,
                r.test_a,
                r.test_b,
                r.test_a - r.test_b,
                r.elapsed_a,
                r.elapsed_b,
                r.elapsed_a / r.elapsed_b
            )?;
        }
        writeln!(out)?;
        writeln!(
            out,
            "a = {}, b = {}, metric = {}",
            self.setup_a, self.setup_b, self.metric
        )?;
        writeln!(
            out,
            "median {delta_name} (a - b): {}",
            self.median_test_delta
        )?;
        writeln!(
            out,
            "median runtime ratio (a / b): {:.4}",
            self.median_runtime_ratio
        )?;
        writeln!(
            out,
            "median runtime delta (a - b): {:.4}s",
            self.median_elapsed_delta
        )?;
        writeln!(
            out,
            "wins a: {}, wins b: {}, ties: {}",
            self.wins_a, self.wins_b, self.ties
        )?;
        writeln!(out, "sign test p-value: {:.6}", self.sign_test_p)?;
        Ok(())
    }
}
