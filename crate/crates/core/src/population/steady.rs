use rand::Rng;

use super::selection::{tournament_select, worst_index};
use super::{RunConfig, Scorer};
use crate::error::Result;
use crate::learners::Individual;

/// One generation of steady-state evolution: `pop.len()` single-offspring
/// insertions, each replacing the current worst individual.
pub fn step_steady_state<R: Rng + ?Sized>(
    rng: &mut R,
    pop: &mut [Individual],
    cfg: &RunConfig,
    scorer: &mut Scorer<'_>,
) -> Result<()> {
    let k = cfg.tournament_size.min(pop.len());
    for _ in 0..pop.len() {
        let op = cfg.operators.choose(rng);
        let a = tournament_select(rng, pop, k, scorer.batch_id())?;
        let b = if op.arity() == 2 {
            Some(tournament_select(rng, pop, k, scorer.batch_id())?)
        } else {
            None
        };
        let tree = cfg
            .variation
            .apply(rng, op, pop[a].tree(), b.map(|b| pop[b].tree()));
        let mut child = Individual::new(tree);
        scorer.score(&mut child)?;
        let worst = worst_index(pop);
        if !cfg.elitism || child.fitness() <= pop[worst].fitness() {
            pop[worst] = child;
        }
    }
    Ok(())
}
