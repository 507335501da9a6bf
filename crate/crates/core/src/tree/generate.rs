use rand::Rng;

use super::{Node, SlotKind, Tree, TreeConfig, Window, WindowPolicy};
use crate::primitives::Primitive;

/// Random tree construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    /// Function or terminal with equal probability at every node above the depth limit.
    Grow,
    /// Function nodes at every level above the depth limit.
    Full,
}

/// Smallest depth used by ramped half-and-half initialization.
const RAMP_MIN_DEPTH: usize = 2;

impl TreeConfig {
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R, method: InitMethod) -> Tree {
        self.generate_with_depth(rng, method, self.max_depth)
    }

    /// A tree whose depth is at most `depth` (exactly `depth` for `Full`),
    /// carrying this configuration's bound. `depth` is capped at `max_depth`.
    pub fn generate_with_depth<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        method: InitMethod,
        depth: usize,
    ) -> Tree {
        let mut nodes = Vec::new();
        self.grow_into(
            rng,
            &mut nodes,
            SlotKind::Scalar,
            depth.min(self.max_depth),
            method,
        );
        Tree::from_nodes_unchecked(nodes, self.max_depth)
    }

    /// `n` trees alternating Grow and Full over the depth ramp `2..=max_depth`.
    pub fn ramped_half_and_half<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Tree> {
        let lo = RAMP_MIN_DEPTH.min(self.max_depth);
        let ramp: Vec<usize> = (lo..=self.max_depth).collect();
        (0..n)
            .map(|i| {
                let depth = ramp[(i / 2) % ramp.len()];
                let method = if i % 2 == 0 {
                    InitMethod::Grow
                } else {
                    InitMethod::Full
                };
                self.generate_with_depth(rng, method, depth)
            })
            .collect()
    }

    /// Fresh subtree for a slot of the given kind with `budget` levels left below it.
    pub(crate) fn random_subtree<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        slot: SlotKind,
        budget: usize,
        method: InitMethod,
    ) -> Vec<Node> {
        let mut nodes = Vec::new();
        self.grow_into(rng, &mut nodes, slot, budget, method);
        nodes
    }

    fn grow_into<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        out: &mut Vec<Node>,
        slot: SlotKind,
        budget: usize,
        method: InitMethod,
    ) {
        if slot == SlotKind::Vector {
            out.push(Node::Vector(self.random_window(rng)));
            return;
        }
        let function = budget > 0
            && match method {
                InitMethod::Full => true,
                InitMethod::Grow => rng.random_bool(0.5),
            };
        if !function {
            out.push(self.random_scalar_terminal(rng));
            return;
        }
        let p = self.random_function(rng, budget, method);
        out.push(Node::Function(p));
        if p.is_mezzanine() {
            self.grow_into(rng, out, SlotKind::Vector, budget - 1, method);
        } else {
            for _ in 0..p.arity() {
                self.grow_into(rng, out, SlotKind::Scalar, budget - 1, method);
            }
        }
    }

    fn random_function<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        budget: usize,
        method: InitMethod,
    ) -> Primitive {
        let low = self.primitives.low();
        let mezz = self.primitives.mezzanine();
        // Full trees only end early where a reducer's vector leaf sits one level down.
        let allow_mezz = method == InitMethod::Grow || budget == 1;
        let n = low.len() + if allow_mezz { mezz.len() } else { 0 };
        let k = rng.random_range(0..n);
        if k < low.len() {
            low[k]
        } else {
            mezz[k - low.len()]
        }
    }

    pub(crate) fn random_scalar_terminal<R: Rng + ?Sized>(&self, rng: &mut R) -> Node {
        if rng.random_bool(0.5) {
            Node::Feature(rng.random_range(0..self.input_size))
        } else {
            Node::Constant(rng.random_range(-1.0..=1.0))
        }
    }

    pub(crate) fn random_window<R: Rng + ?Sized>(&self, rng: &mut R) -> Window {
        let n = self.input_size;
        match &self.windows {
            WindowPolicy::Full => Window::full(n),
            WindowPolicy::Random => {
                let len = rng.random_range(1..=n);
                let start = rng.random_range(0..=n - len);
                Window { start, len }
            }
            WindowPolicy::Declared(list) => list[rng.random_range(0..list.len())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::PrimitiveSet;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(set: PrimitiveSet, input: usize, depth: usize) -> TreeConfig {
        TreeConfig::new(set, input, depth).unwrap()
    }

    #[test]
    fn full_depth_one_is_a_single_function_over_terminals() {
        let c = cfg(PrimitiveSet::scalar_default(), 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let t = c.generate(&mut rng, InitMethod::Full);
            assert_eq!(t.depth(), 1);
            assert!(t.nodes()[0].is_function());
            assert_eq!(t.nodes().iter().filter(|n| n.is_function()).count(), 1);
        }
    }

    #[test]
    fn full_trees_reach_exact_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for depth in 1..=9 {
            for set in [PrimitiveSet::scalar_default(), PrimitiveSet::default()] {
                let c = cfg(set, 5, depth);
                for _ in 0..20 {
                    assert_eq!(c.generate(&mut rng, InitMethod::Full).depth(), depth);
                }
            }
        }
    }

    #[test]
    fn grow_depths_vary_and_respect_bound() {
        let c = cfg(PrimitiveSet::scalar_default(), 2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut histogram = [0usize; 7];
        for _ in 0..1000 {
            let t = c.generate(&mut rng, InitMethod::Grow);
            histogram[t.depth()] += 1;
        }
        assert_eq!(histogram.iter().sum::<usize>(), 1000);
        assert!(
            histogram.iter().filter(|&&n| n > 0).count() > 1,
            "{histogram:?}"
        );
    }

    #[test]
    fn ramped_population_mixes_depths() {
        let c = cfg(PrimitiveSet::default(), 4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pop = c.ramped_half_and_half(&mut rng, 100);
        assert_eq!(pop.len(), 100);
        let full_depths: Vec<_> = pop.iter().skip(1).step_by(2).map(Tree::depth).collect();
        assert_eq!(&full_depths[..5], &[2, 3, 4, 5, 6]);
    }

    #[test]
    fn mezzanine_trees_use_vector_terminals() {
        let c = cfg(PrimitiveSet::default(), 9, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seen = (0..200)
            .map(|_| c.generate(&mut rng, InitMethod::Grow))
            .any(|t| t.nodes().iter().any(|n| matches!(n, Node::Vector(_))));
        assert!(seen);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn generated_trees_are_valid(
            seed in any::<u64>(),
            input in 1usize..12,
            depth in 1usize..=12,
            mezz in any::<bool>(),
            full in any::<bool>(),
        ) {
            let set = if mezz { PrimitiveSet::default() } else { PrimitiveSet::scalar_default() };
            let c = cfg(set, input, depth);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let method = if full { InitMethod::Full } else { InitMethod::Grow };
            let t = c.generate(&mut rng, method);
            prop_assert!(c.check(&t).is_ok());
            prop_assert!(t.depth() <= depth);
            if full {
                prop_assert_eq!(t.depth(), depth);
            }
        }
    }
}
