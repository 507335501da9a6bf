use super::{Node, Tree};
use crate::primitives::Primitive;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Feature(usize),
    Unary(Primitive),
    Binary(Primitive),
    Reduce(Primitive, usize, usize),
}

/// A tree flattened to postfix order for evaluation on a value stack.
///
/// Uses the same primitive kernels as [`Tree::eval_reference`], so results
/// agree bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    ops: Vec<Op>,
    max_stack: usize,
}

impl LinearProgram {
    pub fn compile(tree: &Tree) -> Self {
        let mut ops = Vec::with_capacity(tree.size());
        emit(tree.nodes(), 0, &mut ops);
        let mut height = 0usize;
        let mut max_stack = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Feature(_) | Op::Reduce(..) => height += 1,
                Op::Unary(_) => {}
                Op::Binary(_) => height -= 1,
            }
            max_stack = max_stack.max(height);
        }
        LinearProgram { ops, max_stack }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut stack = Vec::with_capacity(self.max_stack);
        self.eval_with(x, &mut stack)
    }

    /// Evaluates using a caller-provided scratch stack.
    pub fn eval_with(&self, x: &[f64], stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Feature(f) => stack.push(x[f]),
                Op::Reduce(p, start, end) => stack.push(p.reduce(&x[start..end])),
                Op::Unary(p) => {
                    let top = stack.last_mut().expect("stack underflow");
                    *top = p.apply1(*top);
                }
                Op::Binary(p) => {
                    let b = stack.pop().expect("stack underflow");
                    let top = stack.last_mut().expect("stack underflow");
                    *top = p.apply2(*top, b);
                }
            }
        }
        debug_assert_eq!(stack.len(), 1);
        stack[0]
    }
}

/// Emits the subtree at `index` in postfix order and returns the index after it.
fn emit(nodes: &[Node], index: usize, ops: &mut Vec<Op>) -> usize {
    match nodes[index] {
        Node::Constant(c) => {
            ops.push(Op::Const(c));
            index + 1
        }
        Node::Feature(f) => {
            ops.push(Op::Feature(f));
            index + 1
        }
        Node::Vector(_) => unreachable!("vector terminal in scalar position"),
        Node::Function(p) if p.is_mezzanine() => {
            let Node::Vector(w) = nodes[index + 1] else {
                unreachable!("mezzanine child must be a vector terminal")
            };
            ops.push(Op::Reduce(p, w.start, w.start + w.len));
            index + 2
        }
        Node::Function(p) => {
            let mut next = index + 1;
            for _ in 0..p.arity() {
                next = emit(nodes, next, ops);
            }
            ops.push(if p.arity() == 1 {
                Op::Unary(p)
            } else {
                Op::Binary(p)
            });
            next
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::figure_one;
    use super::super::{InitMethod, TreeConfig};
    use super::*;
    use crate::primitives::PrimitiveSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_program() {
        let p = Tree::constant(5.0).compile();
        assert_eq!(p.eval(&[0.0, 0.0]), 5.0);
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn figure_one_matches_reference() {
        let t = figure_one(6);
        let p = t.compile();
        assert_eq!(p.eval(&[3.0, 1.0]), 1.998);
        assert_eq!(
            p.eval(&[3.0, 1.0]).to_bits(),
            t.eval_reference(&[3.0, 1.0]).to_bits()
        );
        assert_eq!(p.max_stack, 2);
    }

    #[test]
    fn differential_against_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut stack = Vec::new();
        for i in 0..1000 {
            let depth = 1 + i % 12;
            let c = TreeConfig::new(PrimitiveSet::default(), 6, depth).unwrap();
            let method = if i % 2 == 0 {
                InitMethod::Grow
            } else {
                InitMethod::Full
            };
            let t = c.generate_with_depth(&mut rng, method, depth.min(8));
            let p = t.compile();
            for _ in 0..100 {
                let x: Vec<f64> = (0..6).map(|_| rng.random_range(-10.0..10.0)).collect();
                assert_eq!(
                    p.eval_with(&x, &mut stack).to_bits(),
                    t.eval_reference(&x).to_bits(),
                    "{t}"
                );
            }
        }
    }
}
