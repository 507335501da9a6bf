//! Python bindings: trees, data generators, fitness, a `GeneticProgram`
//! estimator with `fit`/`predict`, and the experiment runner.

use std::collections::HashMap;
use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gp_core::datasets::{self, Dataset};
use gp_core::experiment::{self, DatasetSpec, ExperimentConfig, IndParams, IslandSpec, Overrides};
use gp_core::learners::LearnerKind;
use gp_core::population::{self, RunConfig};
use gp_core::scheduler::WorkerPool;
use gp_core::tree::{InitMethod, LinearProgram, TreeConfig, WindowPolicy};
use gp_core::{GpError, PrimitiveSet, Sample, Tree};

fn py_err(e: GpError) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn samples(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Vec<Sample>> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err(format!(
            "X has {} rows but y has {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.into_iter()
        .zip(y)
        .map(|(x, y)| Sample::new(x, y))
        .collect())
}

fn unzip(data: &Dataset) -> (Vec<Vec<f64>>, Vec<f64>) {
    data.samples().iter().map(|s| (s.x.clone(), s.y)).unzip()
}

/// An expression tree with its compiled evaluator.
#[pyclass(name = "Tree", module = "gp_engine", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTree {
    tree: Tree,
    program: LinearProgram,
}

impl PyTree {
    fn wrap(tree: Tree) -> Self {
        let program = tree.compile();
        PyTree { tree, program }
    }
}

#[pymethods]
impl PyTree {
    /// Parses the s-expression form, e.g. `(ADD (RELU x0) -0.5)`.
    #[staticmethod]
    #[pyo3(signature = (text, max_depth=None))]
    fn parse(text: &str, max_depth: Option<usize>) -> PyResult<Self> {
        Tree::parse(text, max_depth).map(Self::wrap).map_err(py_err)
    }

    #[getter]
    fn depth(&self) -> usize {
        self.tree.depth()
    }

    #[getter]
    fn size(&self) -> usize {
        self.tree.size()
    }

    #[getter]
    fn max_depth(&self) -> usize {
        self.tree.max_depth()
    }

    /// Checks feature indices and windows against an input width.
    fn validate(&self, input_size: usize) -> PyResult<()> {
        self.tree.validate(input_size).map_err(py_err)
    }

    fn evaluate(&self, x: Vec<f64>) -> f64 {
        self.program.eval(&x)
    }

    fn evaluate_reference(&self, x: Vec<f64>) -> f64 {
        self.tree.eval_reference(&x)
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> Vec<f64> {
        x.iter().map(|row| self.program.eval(row)).collect()
    }

    fn __str__(&self) -> String {
        self.tree.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Tree('{}')", self.tree)
    }
}

/// Random tree via Grow or Full over the default primitive set.
#[pyfunction]
#[pyo3(signature = (input_size, max_depth, method="grow", mezzanine=false, seed=0))]
fn generate(
    input_size: usize,
    max_depth: usize,
    method: &str,
    mezzanine: bool,
    seed: u64,
) -> PyResult<PyTree> {
    let method = match method {
        "grow" => InitMethod::Grow,
        "full" => InitMethod::Full,
        other => {
            return Err(PyValueError::new_err(format!(
                "method must be 'grow' or 'full', got '{other}'"
            )))
        }
    };
    let set = if mezzanine {
        PrimitiveSet::with_mezzanine_default()
    } else {
        PrimitiveSet::scalar_default()
    };
    let cfg = TreeConfig::new(set, input_size, max_depth).map_err(py_err)?;
    let mut rng = gp_core::scheduler::rng_stream(seed, 0);
    Ok(PyTree::wrap(cfg.generate(&mut rng, method)))
}

#[pyfunction]
fn keijzer12(x: f64, y: f64) -> f64 {
    datasets::keijzer12(x, y)
}

/// `(X, y)` sampled uniformly from `[lo, hi]^2`.
#[pyfunction]
#[pyo3(signature = (n, seed=0, lo=-3.0, hi=3.0))]
fn gen_keijzer12(n: usize, seed: u64, lo: f64, hi: f64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    datasets::gen_keijzer12(n, seed, lo, hi)
        .map(|d| unzip(&d))
        .map_err(py_err)
}

/// `(X, y)` noisy flattened patches (center-out order) and clean center pixels.
#[pyfunction]
#[pyo3(signature = (n, patch_side, sigma, seed=0))]
fn gen_noisy_patches(
    n: usize,
    patch_side: usize,
    sigma: f64,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    datasets::gen_noisy_patches(n, patch_side, sigma, seed)
        .map(|d| unzip(&d))
        .map_err(py_err)
}

/// Fitness of `tree` on `(X, y)` for a learner (lower is better).
#[pyfunction]
#[pyo3(signature = (tree, x, y, learner="RegressorLS"))]
fn fitness(tree: PyRef<'_, PyTree>, x: Vec<Vec<f64>>, y: Vec<f64>, learner: &str) -> PyResult<f64> {
    let learner: LearnerKind = learner.parse().map_err(py_err)?;
    let batch = samples(x, y)?;
    learner.fitness(&tree.program, &batch).map_err(py_err)
}

/// Estimator front end: constructor keywords follow the experiment config keys.
#[pyclass(name = "GeneticProgram", module = "gp_engine")]
struct PyGeneticProgram {
    config: RunConfig,
    n_jobs: usize,
    seed: u64,
    best: Option<PyTree>,
    log: Vec<(usize, f64, f64, f64, u64, f64)>,
}

fn default_names(names: Option<Vec<String>>, defaults: &[&str]) -> Vec<String> {
    names.unwrap_or_else(|| defaults.iter().map(|s| s.to_string()).collect())
}

#[pymethods]
impl PyGeneticProgram {
    #[new]
    #[pyo3(signature = (
        individual_class="RegressorLS", lowlevel=None, mezzanine=None, ind_params=None,
        operations=None, operations_prob=None, operations_arity=None, pop_size=100,
        generations=10, pop_dynamics="Steady_State", online=false, batch_size=None,
        minimization=true, n_jobs=1, seed=0, tournament_size=3, numeric_sigma=0.1,
        n_islands=None, migration_interval=None, n_migrants=None, vector_windows="random"
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        individual_class: &str,
        lowlevel: Option<Vec<String>>,
        mezzanine: Option<Vec<String>>,
        ind_params: Option<HashMap<String, usize>>,
        operations: Option<Vec<String>>,
        operations_prob: Option<Vec<f64>>,
        operations_arity: Option<Vec<usize>>,
        pop_size: usize,
        generations: usize,
        pop_dynamics: &str,
        online: bool,
        batch_size: Option<usize>,
        minimization: bool,
        n_jobs: usize,
        seed: u64,
        tournament_size: usize,
        numeric_sigma: f64,
        n_islands: Option<usize>,
        migration_interval: Option<usize>,
        n_migrants: Option<usize>,
        vector_windows: &str,
    ) -> PyResult<Self> {
        let params = ind_params.unwrap_or_default();
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| PyValueError::new_err(format!("ind_params needs '{k}'")))
        };
        let vector_windows = match vector_windows {
            "random" => WindowPolicy::Random,
            "full" => WindowPolicy::Full,
            other => {
                return Err(PyValueError::new_err(format!(
                    "vector_windows must be 'random' or 'full', got '{other}'"
                )))
            }
        };
        let cfg = ExperimentConfig {
            name: "python".into(),
            individual_class: individual_class.into(),
            lowlevel: default_names(lowlevel, &PrimitiveSet::DEFAULT_LOW),
            mezzanine: mezzanine.unwrap_or_default(),
            ind_params: IndParams {
                input_vector_size: get("input_vector_size")?,
                complexity: get("complexity")?,
            },
            vector_windows,
            operations: default_names(
                operations,
                &["mutation", "protected_crossover", "numeric_mutation"],
            ),
            operations_prob: operations_prob.unwrap_or_else(|| vec![0.4, 0.4, 0.2]),
            operations_arity: operations_arity.unwrap_or_else(|| vec![1, 2, 1]),
            numeric_sigma,
            pop_size,
            generations,
            pop_dynamics: pop_dynamics.into(),
            cellular: None,
            islands: n_islands.map(|n| IslandSpec {
                n_islands: n,
                migration_interval,
                n_migrants,
                topology: Default::default(),
            }),
            tournament_size,
            elitism: true,
            online,
            batch_size,
            minimization,
            n_jobs: Some(n_jobs),
            seed,
            repetitions: 1,
            dataset: DatasetSpec::Keijzer12 {
                n_train: 1,
                n_test: 0,
                lo: -3.0,
                hi: 3.0,
                data_seed: 0,
            },
        };
        Ok(PyGeneticProgram {
            config: cfg.run_config().map_err(py_err)?,
            n_jobs,
            seed,
            best: None,
            log: Vec::new(),
        })
    }

    /// Evolves on `(x, y)`; the optional test split feeds the logged test metric.
    #[pyo3(signature = (x, y, x_test=None, y_test=None))]
    fn fit(
        &mut self,
        py: Python<'_>,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        x_test: Option<Vec<Vec<f64>>>,
        y_test: Option<Vec<f64>>,
    ) -> PyResult<()> {
        let train = samples(x, y)?;
        let test = match (x_test, y_test) {
            (Some(x), Some(y)) => samples(x, y)?,
            (None, None) => Vec::new(),
            _ => {
                return Err(PyValueError::new_err(
                    "pass both x_test and y_test or neither",
                ))
            }
        };
        let data = Dataset::from_train_test(train, test, self.config.learner).map_err(py_err)?;
        let (config, n_jobs, seed) = (&self.config, self.n_jobs, self.seed);
        let outcome = py
            .detach(|| {
                let pool = WorkerPool::new(n_jobs)?;
                population::run(config, &data, &pool, seed)
            })
            .map_err(py_err)?;
        self.log = outcome
            .log
            .rows
            .iter()
            .map(|r| {
                (
                    r.generation,
                    r.best_train,
                    r.best_test,
                    r.mean_fitness,
                    r.evaluations,
                    r.elapsed_s,
                )
            })
            .collect();
        self.best = Some(PyTree::wrap(outcome.best));
        Ok(())
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        Ok(self.fitted()?.predict(x))
    }

    /// Test metric of the fitted model (accuracy for classifiers, MSE otherwise).
    fn score(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
        let best = self.fitted()?;
        let batch = samples(x, y)?;
        self.config
            .learner
            .test_metric(&best.program, &batch)
            .map_err(py_err)
    }

    #[getter]
    fn best_tree(&self) -> Option<PyTree> {
        self.best.clone()
    }

    /// Rows of `(generation, best_train, best_test, mean_fitness, evaluations, elapsed_s)`.
    #[getter]
    fn log(&self) -> Vec<(usize, f64, f64, f64, u64, f64)> {
        self.log.clone()
    }
}

impl PyGeneticProgram {
    fn fitted(&self) -> PyResult<&PyTree> {
        self.best
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err("call fit() first"))
    }
}

/// Runs a config file like `gp run` and returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (config, out, seed=None, jobs=None, reps=None, parallel_reps=false))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    out: &str,
    seed: Option<u64>,
    jobs: Option<usize>,
    reps: Option<usize>,
    parallel_reps: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let overrides = Overrides {
        seed,
        jobs,
        reps,
        parallel_reps,
    };
    let summary = py
        .detach(|| experiment::run_experiment(Path::new(config), Path::new(out), &overrides))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("setup", &summary.setup)?;
    d.set_item("metric", &summary.metric)?;
    d.set_item("median_test", summary.median_test())?;
    d.set_item(
        "final_test",
        summary
            .reps
            .iter()
            .map(|r| r.final_test)
            .collect::<Vec<_>>(),
    )?;
    d.set_item(
        "elapsed_s",
        summary.reps.iter().map(|r| r.elapsed_s).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

#[pymodule]
fn gp_engine(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTree>()?;
    m.add_class::<PyGeneticProgram>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(keijzer12, m)?)?;
    m.add_function(wrap_pyfunction!(gen_keijzer12, m)?)?;
    m.add_function(wrap_pyfunction!(gen_noisy_patches, m)?)?;
    m.add_function(wrap_pyfunction!(fitness, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
