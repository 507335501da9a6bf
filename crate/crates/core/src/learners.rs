//! Individual classes: a tree bound to a fitness function.
//!
//! All three learners minimize: MSE for the regressor and denoiser, error
//! rate for the classifier. The classifier reports accuracy as its test metric.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use crate::error::{GpError, Result};
use crate::tree::{LinearProgram, Sample, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    /// Least-squares regressor.
    RegressorLS,
    /// Two-class classifier, class 1 iff the tree output is positive.
    BinaryClassifier,
    /// Predicts the clean center pixel from a noisy flattened patch.
    Denoiser,
}

impl LearnerKind {
    pub fn config_name(self) -> &'static str {
        match self {
            LearnerKind::RegressorLS => "RegressorLS",
            LearnerKind::BinaryClassifier => "BinaryClassifier",
            LearnerKind::Denoiser => "Denoiser",
        }
    }

    /// Every learner minimizes its fitness.
    pub fn minimization(self) -> bool {
        true
    }

    pub fn fitness<S: Borrow<Sample>>(self, program: &LinearProgram, batch: &[S]) -> Result<f64> {
        let mut stack = Vec::new();
        self.score(batch, |x| program.eval_with(x, &mut stack))
    }

    /// Fitness computed with the recursive reference interpreter.
    pub fn fitness_reference<S: Borrow<Sample>>(self, tree: &Tree, batch: &[S]) -> Result<f64> {
        self.score(batch, |x| tree.eval_reference(x))
    }

    fn score<S: Borrow<Sample>>(
        self,
        batch: &[S],
        mut predict: impl FnMut(&[f64]) -> f64,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(GpError::Usage("fitness of an empty batch".into()));
        }
        let n = batch.len() as f64;
        let total = match self {
            LearnerKind::RegressorLS | LearnerKind::Denoiser => batch
                .iter()
                .map(|s| {
                    let s: &Sample = s.borrow();
                    let e = predict(&s.x) - s.y;
                    e * e
                })
                .sum::<f64>(),
            LearnerKind::BinaryClassifier => batch
                .iter()
                .filter(|s| {
                    let s: &Sample = (*s).borrow();
                    classify(predict(&s.x)) != s.y
                })
                .count() as f64,
        };
        // squared errors near the primitive ceiling can overflow the sum
        Ok((total / n).min(f64::MAX))
    }

    /// Metric reported on held-out data: accuracy for the classifier, fitness otherwise.
    pub fn test_metric<S: Borrow<Sample>>(
        self,
        program: &LinearProgram,
        batch: &[S],
    ) -> Result<f64> {
        let f = self.fitness(program, batch)?;
        Ok(match self {
            LearnerKind::BinaryClassifier => 1.0 - f,
            _ => f,
        })
    }

    pub fn metric_name(self) -> &'static str {
        match self {
            LearnerKind::BinaryClassifier => "accuracy",
            _ => "mse",
        }
    }

    pub fn metric_higher_is_better(self) -> bool {
        self == LearnerKind::BinaryClassifier
    }
}

fn classify(output: f64) -> f64 {
    if output > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.config_name())
    }
}

impl FromStr for LearnerKind {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RegressorLS" => Ok(LearnerKind::RegressorLS),
            "BinaryClassifier" => Ok(LearnerKind::BinaryClassifier),
            "Denoiser" => Ok(LearnerKind::Denoiser),
            _ => Err(GpError::Config(format!("unknown individual_class '{s}'"))),
        }
    }
}

pub fn fitness_regression<S: Borrow<Sample>>(t: &Tree, batch: &[S]) -> Result<f64> {
    LearnerKind::RegressorLS.fitness(&t.compile(), batch)
}

pub fn fitness_classification<S: Borrow<Sample>>(t: &Tree, batch: &[S]) -> Result<f64> {
    LearnerKind::BinaryClassifier.fitness(&t.compile(), batch)
}

pub fn fitness_denoise<S: Borrow<Sample>>(t: &Tree, batch: &[S]) -> Result<f64> {
    LearnerKind::Denoiser.fitness(&t.compile(), batch)
}

/// A tree with its compiled form and a fitness cache tagged by batch id.
#[derive(Debug, Clone)]
pub struct Individual {
    tree: Tree,
    program: LinearProgram,
    fitness: Option<f64>,
    batch_id: Option<u64>,
}

impl Individual {
    pub fn new(tree: Tree) -> Self {
        let program = tree.compile();
        Individual {
            tree,
            program,
            fitness: None,
            batch_id: None,
        }
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn program(&self) -> &LinearProgram {
        &self.program
    }

    pub fn size(&self) -> usize {
        self.tree.size()
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    pub fn batch_id(&self) -> Option<u64> {
        self.batch_id
    }

    /// Cached fitness if it refers to `batch_id`.
    pub fn fitness_on(&self, batch_id: u64) -> Option<f64> {
        match self.batch_id {
            Some(b) if b == batch_id => self.fitness,
            _ => None,
        }
    }

    pub fn set_fitness(&mut self, fitness: f64, batch_id: u64) {
        self.fitness = Some(fitness);
        self.batch_id = Some(batch_id);
    }

    pub fn invalidate(&mut self) {
        self.fitness = None;
        self.batch_id = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::fixtures::figure_one;

    fn s(x: &[f64], y: f64) -> Sample {
        Sample::new(x.to_vec(), y)
    }

    #[test]
    fn regression_examples() {
        let zero = Tree::constant(0.0);
        assert_eq!(
            fitness_regression(&zero, &[s(&[0.0, 0.0], 5.0)]).unwrap(),
            25.0
        );
        let t = figure_one(6);
        let batch: Vec<Sample> = [[3.0, 1.0], [0.0, 0.0], [-1.0, 2.0]]
            .iter()
            .map(|x| s(x, t.eval_reference(x)))
            .collect();
        assert_eq!(fitness_regression(&t, &batch).unwrap(), 0.0);
    }

    #[test]
    fn classification_examples() {
        let t = Tree::parse("x0", Some(2)).unwrap();
        let batch = [s(&[0.5], 1.0), s(&[-0.2], 0.0)];
        assert_eq!(fitness_classification(&t, &batch).unwrap(), 0.0);
        let neg = Tree::constant(-1.0);
        let zeros = [s(&[1.0], 0.0), s(&[2.0], 0.0), s(&[3.0], 0.0)];
        assert_eq!(fitness_classification(&neg, &zeros).unwrap(), 0.0);
        let mixed = [
            s(&[1.0], 0.0),
            s(&[2.0], 1.0),
            s(&[3.0], 1.0),
            s(&[4.0], 0.0),
        ];
        assert_eq!(fitness_classification(&neg, &mixed).unwrap(), 0.5);
        let p = neg.compile();
        assert_eq!(
            LearnerKind::BinaryClassifier
                .test_metric(&p, &mixed)
                .unwrap(),
            0.5
        );
    }

    #[test]
    fn denoise_identity_on_clean_patch() {
        let center = Tree::parse("x4", Some(3)).unwrap();
        let batch: Vec<Sample> = (0..5)
            .map(|k| {
                let x: Vec<f64> = (0..9).map(|i| (i * k) as f64 / 40.0).collect();
                let y = x[4];
                Sample::new(x, y)
            })
            .collect();
        assert_eq!(fitness_denoise(&center, &batch).unwrap(), 0.0);
    }

    #[test]
    fn empty_batch_is_usage_error() {
        let t = Tree::constant(1.0);
        let empty: [Sample; 0] = [];
        assert!(matches!(
            fitness_regression(&t, &empty),
            Err(GpError::Usage(_))
        ));
        assert!(matches!(
            fitness_classification(&t, &empty),
            Err(GpError::Usage(_))
        ));
        assert!(matches!(
            fitness_denoise(&t, &empty),
            Err(GpError::Usage(_))
        ));
    }

    #[test]
    fn overflowing_errors_stay_finite() {
        let t = Tree::parse("(X2 (X2 x0))", None).unwrap();
        let batch: Vec<Sample> = (0..10).map(|_| s(&[1e100], -1e150)).collect();
        let f = fitness_regression(&t, &batch).unwrap();
        assert!(f.is_finite());
    }

    #[test]
    fn cache_is_tagged_by_batch() {
        let mut ind = Individual::new(Tree::constant(1.0));
        assert_eq!(ind.fitness_on(0), None);
        ind.set_fitness(2.0, 7);
        assert_eq!(ind.fitness_on(7), Some(2.0));
        assert_eq!(ind.fitness_on(8), None);
        ind.invalidate();
        assert_eq!(ind.fitness(), None);
    }

    #[test]
    fn reference_and_fast_fitness_agree() {
        let t = figure_one(6);
        let batch: Vec<Sample> = (0..50)
            .map(|i| {
                s(
                    &[i as f64 * 0.3 - 7.0, 3.0 - i as f64 * 0.11],
                    (i % 3) as f64,
                )
            })
            .collect();
        for kind in [
            LearnerKind::RegressorLS,
            LearnerKind::BinaryClassifier,
            LearnerKind::Denoiser,
        ] {
            assert_eq!(
                kind.fitness(&t.compile(), &batch).unwrap().to_bits(),
                kind.fitness_reference(&t, &batch).unwrap().to_bits()
            );
        }
    }
}
