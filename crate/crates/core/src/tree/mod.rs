//! Expression trees stored as a flat prefix-order node sequence.
//!
//! The root sits at index 0 and every function node is immediately followed by
//! its children's subtrees, so any subtree occupies a contiguous index range.
//! A lone node has depth 0.

mod generate;
mod linear;
mod text;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};
use crate::primitives::{Primitive, PrimitiveSet};

pub use generate::InitMethod;
pub use linear::LinearProgram;

/// A contiguous slice `[start, start + len)` of the input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn full(input_size: usize) -> Self {
        Window {
            start: 0,
            len: input_size,
        }
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// One input vector with its target (regression value, class label in
/// {0, 1}, or clean pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Sample { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Function(Primitive),
    Feature(usize),
    Vector(Window),
    Constant(f64),
}

impl Node {
    pub fn arity(&self) -> usize {
        match self {
            Node::Function(p) => p.arity(),
            _ => 0,
        }
    }

    pub fn is_function(&self) -> bool {
        matches!(self, Node::Function(_))
    }

    /// The kind of slot this node may legally occupy.
    pub fn slot_kind(&self) -> SlotKind {
        match self {
            Node::Vector(_) => SlotKind::Vector,
            _ => SlotKind::Scalar,
        }
    }
}

/// Type of value a child position expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Scalar,
    Vector,
}

/// Why a subtree replacement was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Typing { slot: SlotKind, donor: SlotKind },
    Depth { depth: usize, max_depth: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Typing { slot, donor } => {
                write!(f, "{donor:?} subtree cannot fill a {slot:?} slot")
            }
            Violation::Depth { depth, max_depth } => {
                write!(f, "depth {depth} exceeds bound {max_depth}")
            }
        }
    }
}

impl From<Violation> for GpError {
    fn from(v: Violation) -> Self {
        GpError::MalformedTree(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    max_depth: usize,
}

impl Tree {
    /// Builds a tree after checking arity, layer typing and the depth bound.
    pub fn new(nodes: Vec<Node>, max_depth: usize) -> Result<Self> {
        let tree = Tree { nodes, max_depth };
        tree.check_structure()?;
        Ok(tree)
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<Node>, max_depth: usize) -> Self {
        let tree = Tree { nodes, max_depth };
        debug_assert!(tree.check_structure().is_ok(), "{tree}");
        tree
    }

    pub fn constant(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Constant(value)],
            max_depth: 0,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Same nodes under a different depth bound.
    pub fn with_max_depth(self, max_depth: usize) -> Result<Self> {
        Tree::new(self.nodes, max_depth)
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        self.heights()[0]
    }

    /// Depth of every node measured from the root.
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        // pending child counts of open ancestors
        let mut open: Vec<usize> = Vec::new();
        for node in &self.nodes {
            depths.push(open.len());
            if node.arity() > 0 {
                open.push(node.arity());
                continue;
            }
            // a finished leaf may complete a chain of ancestors
            while let Some(last) = open.last_mut() {
                *last -= 1;
                if *last == 0 {
                    open.pop();
                } else {
                    break;
                }
            }
        }
        depths
    }

    /// Height of the subtree rooted at every node (leaves have height 0).
    pub fn heights(&self) -> Vec<usize> {
        let mut heights = vec![0; self.nodes.len()];
        let mut stack: Vec<usize> = Vec::new();
        for (i, node) in self.nodes.iter().enumerate().rev() {
            let mut h = 0;
            for _ in 0..node.arity() {
                h = h.max(stack.pop().expect("valid prefix tree") + 1);
            }
            heights[i] = h;
            stack.push(h);
        }
        heights
    }

    /// Index range covered by the subtree rooted at `index`.
    pub fn subtree_span(&self, index: usize) -> Range<usize> {
        let mut need = 1usize;
        let mut end = index;
        while need > 0 {
            need = need - 1 + self.nodes[end].arity();
            end += 1;
        }
        index..end
    }

    /// Child indices of the node at `index`.
    pub fn children(&self, index: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes[index].arity());
        let mut next = index + 1;
        for _ in 0..self.nodes[index].arity() {
            out.push(next);
            next = self.subtree_span(next).end;
        }
        out
    }

    pub fn subtree(&self, index: usize) -> &[Node] {
        &self.nodes[self.subtree_span(index)]
    }

    /// Replaces the nodes in `span` (which must be a whole subtree) by `donor`.
    pub fn replace_subtree(
        &self,
        span: Range<usize>,
        donor: &[Node],
    ) -> std::result::Result<Tree, Violation> {
        let slot = self.nodes[span.start].slot_kind();
        let incoming = donor[0].slot_kind();
        if slot != incoming {
            return Err(Violation::Typing {
                slot,
                donor: incoming,
            });
        }
        let mut nodes = Vec::with_capacity(self.nodes.len() - span.len() + donor.len());
        nodes.extend_from_slice(&self.nodes[..span.start]);
        nodes.extend_from_slice(donor);
        nodes.extend_from_slice(&self.nodes[span.end..]);
        let tree = Tree {
            nodes,
            max_depth: self.max_depth,
        };
        let depth = tree.depth();
        if depth > self.max_depth {
            return Err(Violation::Depth {
                depth,
                max_depth: self.max_depth,
            });
        }
        Ok(tree)
    }

    /// Arity, layer typing and depth checks that do not depend on the input size.
    fn check_structure(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(GpError::MalformedTree("empty tree".into()));
        }
        let mut expected = vec![SlotKind::Scalar];
        for (i, node) in self.nodes.iter().enumerate() {
            let slot = expected.pop().ok_or_else(|| {
                GpError::MalformedTree(format!("node {i} is not reachable from the root"))
            })?;
            if node.slot_kind() != slot {
                return Err(GpError::MalformedTree(format!(
                    "node {i} ({node:?}) cannot occupy a {slot:?} slot"
                )));
            }
            match node {
                Node::Function(p) if p.is_mezzanine() => expected.push(SlotKind::Vector),
                Node::Function(p) => {
                    expected.extend(std::iter::repeat_n(SlotKind::Scalar, p.arity()))
                }
                Node::Constant(c) if !c.is_finite() => {
                    return Err(GpError::MalformedTree(format!(
                        "node {i}: non-finite constant"
                    )))
                }
                Node::Vector(w) if w.len == 0 => {
                    return Err(GpError::MalformedTree(format!("node {i}: empty window")))
                }
                _ => {}
            }
        }
        if !expected.is_empty() {
            return Err(GpError::MalformedTree(format!(
                "{} child slot(s) left unfilled",
                expected.len()
            )));
        }
        let depth = self.depth();
        if depth > self.max_depth {
            return Err(Violation::Depth {
                depth,
                max_depth: self.max_depth,
            }
            .into());
        }
        Ok(())
    }

    /// Full invariant check, including terminal bounds against `input_size`.
    pub fn validate(&self, input_size: usize) -> Result<()> {
        self.check_structure()?;
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Feature(f) if f >= input_size => {
                    return Err(GpError::MalformedTree(format!(
                        "node {i}: feature x{f} out of range for input size {input_size}"
                    )))
                }
                Node::Vector(w) if w.start + w.len > input_size => {
                    return Err(GpError::MalformedTree(format!(
                        "node {i}: window {}:{} out of range for input size {input_size}",
                        w.start, w.len
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Primitives used by this tree that are missing from `set`.
    pub fn foreign_primitives(&self, set: &PrimitiveSet) -> Vec<Primitive> {
        let mut out: Vec<Primitive> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Function(p) if !set.contains(*p) => Some(*p),
                _ => None,
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Recursive post-order interpreter; the reference semantics.
    pub fn eval_reference(&self, x: &[f64]) -> f64 {
        self.eval_at(0, x).0
    }

    fn eval_at(&self, index: usize, x: &[f64]) -> (f64, usize) {
        match self.nodes[index] {
            Node::Constant(c) => (c, index + 1),
            Node::Feature(f) => (x[f], index + 1),
            Node::Vector(_) => unreachable!("vector terminal evaluated in scalar position"),
            Node::Function(p) if p.is_mezzanine() => {
                let Node::Vector(w) = self.nodes[index + 1] else {
                    unreachable!("mezzanine child must be a vector terminal")
                };
                let v = p.apply(&x[w.range()]).expect("validated tree");
                (v, index + 2)
            }
            Node::Function(p) => {
                let mut args = [0.0f64; 2];
                let mut next = index + 1;
                for slot in args.iter_mut().take(p.arity()) {
                    let (v, n) = self.eval_at(next, x);
                    *slot = v;
                    next = n;
                }
                let v = p.apply(&args[..p.arity()]).expect("validated tree");
                (v, next)
            }
        }
    }

    pub fn compile(&self) -> LinearProgram {
        LinearProgram::compile(self)
    }

    /// Arity sequence in prefix order: the tree's shape without primitive
    /// identity or leaf contents.
    pub fn shape(&self) -> Vec<usize> {
        self.nodes.iter().map(Node::arity).collect()
    }
}

/// Everything needed to build or vary trees for one problem.
#[derive(Debug, Clone)]
pub struct TreeConfig {
    pub primitives: PrimitiveSet,
    pub input_size: usize,
    pub max_depth: usize,
    pub windows: WindowPolicy,
}

/// How vector terminals choose their window.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPolicy {
    /// Always the whole input vector.
    Full,
    /// Uniform length in `1..=n`, then uniform start among positions that fit.
    #[default]
    Random,
    /// Uniform choice from a fixed list.
    Declared(Vec<Window>),
}

impl TreeConfig {
    pub fn new(primitives: PrimitiveSet, input_size: usize, max_depth: usize) -> Result<Self> {
        if input_size == 0 {
            return Err(GpError::Config(
                "input_vector_size must be at least 1".into(),
            ));
        }
        if max_depth == 0 {
            return Err(GpError::Config("max tree depth must be at least 1".into()));
        }
        Ok(TreeConfig {
            primitives,
            input_size,
            max_depth,
            windows: WindowPolicy::default(),
        })
    }

    pub fn with_windows(mut self, windows: WindowPolicy) -> Result<Self> {
        if let WindowPolicy::Declared(list) = &windows {
            if list.is_empty() {
                return Err(GpError::Config("declared window list is empty".into()));
            }
            if let Some(w) = list
                .iter()
                .find(|w| w.len == 0 || w.start + w.len > self.input_size)
            {
                return Err(GpError::Config(format!(
                    "window {}:{} does not fit input size {}",
                    w.start, w.len, self.input_size
                )));
            }
        }
        self.windows = windows;
        Ok(self)
    }

    /// Checks `tree` against this configuration's bounds and primitive set.
    pub fn check(&self, tree: &Tree) -> Result<()> {
        tree.validate(self.input_size)?;
        if tree.max_depth() != self.max_depth {
            return Err(GpError::MalformedTree(format!(
                "tree bound {} differs from configured {}",
                tree.max_depth(),
                self.max_depth
            )));
        }
        let foreign = tree.foreign_primitives(&self.primitives);
        if !foreign.is_empty() {
            return Err(GpError::MalformedTree(format!(
                "primitives outside the set: {foreign:?}"
            )));
        }
        Ok(())
    }
}
