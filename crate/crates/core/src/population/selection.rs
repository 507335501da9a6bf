use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;

use crate::error::{GpError, Result};
use crate::learners::Individual;

/// Orders individuals best first: lower fitness, then smaller tree, then lower index.
pub(crate) fn rank(pop: &[Individual], a: usize, b: usize) -> Ordering {
    let fa = pop[a].fitness().unwrap_or(f64::INFINITY);
    let fb = pop[b].fitness().unwrap_or(f64::INFINITY);
    fa.total_cmp(&fb)
        .then(pop[a].size().cmp(&pop[b].size()))
        .then(a.cmp(&b))
}

pub fn best_index(pop: &[Individual]) -> usize {
    (0..pop.len())
        .min_by(|&a, &b| rank(pop, a, b))
        .expect("non-empty population")
}

pub fn worst_index(pop: &[Individual]) -> usize {
    (0..pop.len())
        .max_by(|&a, &b| rank(pop, a, b))
        .expect("non-empty population")
}

/// Indices sorted best first.
pub fn ranked(pop: &[Individual]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| rank(pop, a, b));
    order
}

/// Best of `k` individuals drawn without replacement from the whole population.
pub fn tournament_select<R: Rng + ?Sized>(
    rng: &mut R,
    pop: &[Individual],
    k: usize,
    batch_id: u64,
) -> Result<usize> {
    let all: Vec<usize> = (0..pop.len()).collect();
    tournament_select_among(rng, pop, &all, k, batch_id)
}

/// Tournament restricted to the `candidates` indices of `pop`.
pub fn tournament_select_among<R: Rng + ?Sized>(
    rng: &mut R,
    pop: &[Individual],
    candidates: &[usize],
    k: usize,
    batch_id: u64,
) -> Result<usize> {
    if candidates.is_empty() || k == 0 || k > candidates.len() {
        return Err(GpError::Usage(format!(
            "tournament of size {k} over {} candidate(s)",
            candidates.len()
        )));
    }
    let mut best: Option<usize> = None;
    for pos in index::sample(rng, candidates.len(), k) {
        let i = candidates[pos];
        if pop[i].fitness_on(batch_id).is_none() {
            return Err(GpError::Internal(format!(
                "individual {i} has no fitness for batch {batch_id}"
            )));
        }
        best = match best {
            Some(b) if rank(pop, b, i) != Ordering::Greater => Some(b),
            _ => Some(i),
        };
    }
    Ok(best.expect("k >= 1"))
}
