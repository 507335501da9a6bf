//! Variation operators. Each one maps valid trees to valid trees under the
//! parent's depth bound.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{GpError, Result};
use crate::primitives::PrimitiveSet;
use crate::tree::{InitMethod, Node, Tree, TreeConfig};

/// Attempts at drawing a legal crossover pair before falling back to reproduction.
pub const CROSSOVER_ATTEMPTS: usize = 50;

pub const DEFAULT_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    SubtreeMutation,
    ProtectedCrossover,
    NumericMutation,
    PointMutationI2,
}

impl Operator {
    /// Number of parents consumed.
    pub fn arity(self) -> usize {
        match self {
            Operator::ProtectedCrossover => 2,
            _ => 1,
        }
    }

    /// Name used in experiment configuration files.
    pub fn config_name(self) -> &'static str {
        match self {
            Operator::SubtreeMutation => "mutation",
            Operator::ProtectedCrossover => "protected_crossover",
            Operator::NumericMutation => "numeric_mutation",
            Operator::PointMutationI2 => "mutation_i2",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.config_name())
    }
}

impl FromStr for Operator {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mutation" | "subtree_mutation" => Ok(Operator::SubtreeMutation),
            "protected_crossover" => Ok(Operator::ProtectedCrossover),
            "numeric_mutation" => Ok(Operator::NumericMutation),
            "mutation_i2" | "point_mutation" => Ok(Operator::PointMutationI2),
            _ => Err(GpError::Config(format!("unknown operation '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpec {
    pub op: Operator,
    pub probability: f64,
    pub arity: usize,
}

/// The configured operator list with its selection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTable {
    specs: Vec<OperatorSpec>,
}

impl OperatorTable {
    pub fn new(specs: Vec<OperatorSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(GpError::Config("operation list is empty".into()));
        }
        for s in &specs {
            if !(0.0..=1.0).contains(&s.probability) {
                return Err(GpError::Config(format!(
                    "probability {} of '{}' is outside [0, 1]",
                    s.probability, s.op
                )));
            }
            if s.arity != s.op.arity() {
                return Err(GpError::Config(format!(
                    "'{}' takes {} parent(s), configured arity is {}",
                    s.op,
                    s.op.arity(),
                    s.arity
                )));
            }
        }
        let total: f64 = specs.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GpError::Config(format!(
                "operation probabilities sum to {total}, expected 1"
            )));
        }
        Ok(OperatorTable { specs })
    }

    /// Builds a table from the three parallel lists used in config files.
    pub fn from_lists<S: AsRef<str>>(ops: &[S], probs: &[f64], arities: &[usize]) -> Result<Self> {
        if ops.len() != probs.len() || ops.len() != arities.len() {
            return Err(GpError::Config(format!(
                "operations ({}), operations_prob ({}) and operations_arity ({}) differ in length",
                ops.len(),
                probs.len(),
                arities.len()
            )));
        }
        let specs = ops
            .iter()
            .zip(probs)
            .zip(arities)
            .map(|((op, &probability), &arity)| {
                Ok(OperatorSpec {
                    op: op.as_ref().parse()?,
                    probability,
                    arity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(specs)
    }

    pub fn specs(&self) -> &[OperatorSpec] {
        &self.specs
    }

    /// Draws one operator according to the configured probabilities.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> Operator {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for s in &self.specs {
            acc += s.probability;
            if u < acc {
                return s.op;
            }
        }
        // rounding left u beyond the accumulated total
        self.specs
            .iter()
            .rev()
            .find(|s| s.probability > 0.0)
            .map(|s| s.op)
            .expect("probabilities sum to 1")
    }
}

/// Picks a node index. With `function_bias = Some(p)`, an internal node is
/// chosen with probability `p` when one exists; otherwise uniform.
fn pick_point<R: Rng + ?Sized>(rng: &mut R, tree: &Tree, function_bias: Option<f64>) -> usize {
    let n = tree.size();
    let Some(p) = function_bias else {
        return rng.random_range(0..n);
    };
    let (internal, leaves): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| tree.nodes()[i].is_function());
    let pool = if !internal.is_empty() && (leaves.is_empty() || rng.random_bool(p)) {
        internal
    } else {
        leaves
    };
    pool[rng.random_range(0..pool.len())]
}

/// Replaces a uniformly chosen subtree with a fresh Grow subtree that fits the bound.
pub fn subtree_mutation<R: Rng + ?Sized>(rng: &mut R, cfg: &TreeConfig, parent: &Tree) -> Tree {
    let point = rng.random_range(0..parent.size());
    let depth = parent.node_depths()[point];
    let budget = parent.max_depth().saturating_sub(depth);
    let slot = parent.nodes()[point].slot_kind();
    let fresh = cfg.random_subtree(rng, slot, budget, InitMethod::Grow);
    parent
        .replace_subtree(parent.subtree_span(point), &fresh)
        .expect("fresh subtree sized to the remaining depth budget")
}

/// Subtree crossover restricted to type-legal pairs that respect `a`'s bound.
pub fn protected_crossover<R: Rng + ?Sized>(rng: &mut R, a: &Tree, b: &Tree) -> Tree {
    protected_crossover_biased(rng, a, b, None)
}

/// As [`protected_crossover`], with an optional internal-node bias for point selection.
pub fn protected_crossover_biased<R: Rng + ?Sized>(
    rng: &mut R,
    a: &Tree,
    b: &Tree,
    function_bias: Option<f64>,
) -> Tree {
    let depths_a = a.node_depths();
    let heights_b = b.heights();
    for _ in 0..CROSSOVER_ATTEMPTS {
        let slot = pick_point(rng, a, function_bias);
        let donor = pick_point(rng, b, function_bias);
        let kinds_match = a.nodes()[slot].slot_kind() == b.nodes()[donor].slot_kind();
        if kinds_match && depths_a[slot] + heights_b[donor] <= a.max_depth() {
            return a
                .replace_subtree(a.subtree_span(slot), b.subtree(donor))
                .expect("legality checked before replacement");
        }
    }
    a.clone()
}

/// Adds independent N(0, sigma^2) noise to every constant leaf.
pub fn numeric_mutation<R: Rng + ?Sized>(rng: &mut R, parent: &Tree, sigma: f64) -> Tree {
    if sigma == 0.0
        || !parent
            .nodes()
            .iter()
            .any(|n| matches!(n, Node::Constant(_)))
    {
        return parent.clone();
    }
    let noise = Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative");
    let nodes = parent
        .nodes()
        .iter()
        .map(|n| match *n {
            Node::Constant(c) => {
                let v = c + noise.sample(rng);
                Node::Constant(if v.is_finite() { v } else { c })
            }
            other => other,
        })
        .collect();
    Tree::from_nodes_unchecked(nodes, parent.max_depth())
}

/// Swaps one internal node's primitive for a different one of the same layer and arity.
pub fn point_mutation_i2<R: Rng + ?Sized>(rng: &mut R, set: &PrimitiveSet, parent: &Tree) -> Tree {
    let candidates: Vec<usize> = parent
        .nodes()
        .iter()
        .enumerate()
        .filter_map(|(i, n)| match n {
            Node::Function(p) if set.alternatives(*p).next().is_some() => Some(i),
            _ => None,
        })
        .collect();
    if candidates.is_empty() {
        return parent.clone();
    }
    let point = candidates[rng.random_range(0..candidates.len())];
    let Node::Function(old) = parent.nodes()[point] else {
        unreachable!()
    };
    let alts: Vec<_> = set.alternatives(old).collect();
    let mut nodes = parent.nodes().to_vec();
    nodes[point] = Node::Function(alts[rng.random_range(0..alts.len())]);
    Tree::from_nodes_unchecked(nodes, parent.max_depth())
}

/// Applies `op` to one or two parents.
#[derive(Debug, Clone)]
pub struct Variation {
    pub tree: TreeConfig,
    pub sigma: f64,
    pub function_bias: Option<f64>,
}

impl Variation {
    pub fn new(tree: TreeConfig, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(GpError::Config(format!(
                "numeric mutation sigma {sigma} must be >= 0"
            )));
        }
        Ok(Variation {
            tree,
            sigma,
            function_bias: None,
        })
    }

    pub fn apply<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        op: Operator,
        a: &Tree,
        b: Option<&Tree>,
    ) -> Tree {
        match op {
            Operator::SubtreeMutation => subtree_mutation(rng, &self.tree, a),
            Operator::ProtectedCrossover => {
                let b = b.expect("crossover needs two parents");
                protected_crossover_biased(rng, a, b, self.function_bias)
            }
            Operator::NumericMutation => numeric_mutation(rng, a, self.sigma),
            Operator::PointMutationI2 => point_mutation_i2(rng, &self.tree.primitives, a),
        }
    }
}
