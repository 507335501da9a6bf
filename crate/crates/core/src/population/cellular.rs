use rand::Rng;
use serde::{Deserialize, Serialize};

use super::selection::tournament_select_among;
use super::{RunConfig, Scorer};
use crate::error::{GpError, Result};
use crate::learners::Individual;
use crate::scheduler::WorkerPool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// Cells within Manhattan distance `radius`.
    VonNeumann,
    /// Cells within Chebyshev distance `radius`.
    Moore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellularConfig {
    pub grid_w: usize,
    pub grid_h: usize,
    pub neighborhood: Neighborhood,
    pub radius: usize,
}

impl CellularConfig {
    pub fn cells(&self) -> usize {
        self.grid_w * self.grid_h
    }

    pub fn validate(&self, pop_size: usize) -> Result<()> {
        if self.cells() != pop_size {
            return Err(GpError::Config(format!(
                "grid {}x{} holds {} cells, population is {pop_size}",
                self.grid_w,
                self.grid_h,
                self.cells()
            )));
        }
        if self.radius == 0 {
            return Err(GpError::Config(
                "neighborhood radius must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Distinct cells around every cell on the torus (including the cell
    /// itself), ascending. Cell `(x, y)` has index `y * grid_w + x`.
    pub fn neighborhoods(&self) -> Vec<Vec<usize>> {
        let (w, h) = (self.grid_w as i64, self.grid_h as i64);
        let r = self.radius as i64;
        let offsets: Vec<(i64, i64)> = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| match self.neighborhood {
                Neighborhood::VonNeumann => dx.abs() + dy.abs() <= r,
                Neighborhood::Moore => true,
            })
            .collect();
        (0..self.cells())
            .map(|c| {
                let (x, y) = ((c as i64) % w, (c as i64) / w);
                let mut cells: Vec<usize> = offsets
                    .iter()
                    .map(|&(dx, dy)| ((y + dy).rem_euclid(h) * w + (x + dx).rem_euclid(w)) as usize)
                    .collect();
                cells.sort_unstable();
                cells.dedup();
                cells
            })
            .collect()
    }
}

/// One synchronous sweep. Every cell breeds one offspring from parents in
/// its neighborhood of the pre-sweep grid; offspring are scored in parallel
/// and then each replaces its cell's occupant if it is not worse.
pub fn step_cellular<R: Rng + ?Sized>(
    rng: &mut R,
    pop: &mut [Individual],
    neighborhoods: &[Vec<usize>],
    cfg: &RunConfig,
    scorer: &mut Scorer<'_>,
    pool: &WorkerPool,
) -> Result<()> {
    let batch_id = scorer.batch_id();
    let mut offspring = Vec::with_capacity(pop.len());
    for hood in neighborhoods {
        let k = cfg.tournament_size.min(hood.len());
        let op = cfg.operators.choose(rng);
        let a = tournament_select_among(rng, pop, hood, k, batch_id)?;
        let b = if op.arity() == 2 {
            Some(tournament_select_among(rng, pop, hood, k, batch_id)?)
        } else {
            None
        };
        debug_assert!(hood.contains(&a) && b.is_none_or(|b| hood.contains(&b)));
        let tree = cfg
            .variation
            .apply(rng, op, pop[a].tree(), b.map(|b| pop[b].tree()));
        offspring.push(Individual::new(tree));
    }
    scorer.score_all(&mut offspring, pool)?;
    for (cell, child) in offspring.into_iter().enumerate() {
        if !cfg.elitism || child.fitness() <= pop[cell].fitness() {
            pop[cell] = child;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize, n: Neighborhood, r: usize) -> CellularConfig {
        CellularConfig {
            grid_w: w,
            grid_h: h,
            neighborhood: n,
            radius: r,
        }
    }

    #[test]
    fn von_neumann_on_three_by_three() {
        let hoods = grid(3, 3, Neighborhood::VonNeumann, 1).neighborhoods();
        assert_eq!(hoods.len(), 9);
        for (c, h) in hoods.iter().enumerate() {
            assert_eq!(h.len(), 5, "cell {c}");
            assert!(h.contains(&c));
        }
        // corner (0,0) wraps to (2,0) and (0,2)
        assert_eq!(hoods[0], vec![0, 1, 2, 3, 6]);
    }

    #[test]
    fn moore_and_covering_radius() {
        let hoods = grid(5, 4, Neighborhood::Moore, 1).neighborhoods();
        assert!(hoods.iter().all(|h| h.len() == 9));
        let all = grid(5, 4, Neighborhood::Moore, 3).neighborhoods();
        assert!(all.iter().all(|h| h.len() == 20));
        let vn = grid(4, 4, Neighborhood::VonNeumann, 4).neighborhoods();
        assert!(vn.iter().all(|h| h.len() == 16));
    }

    #[test]
    fn validation() {
        assert!(grid(3, 3, Neighborhood::Moore, 1).validate(9).is_ok());
        assert!(grid(3, 3, Neighborhood::Moore, 1).validate(10).is_err());
        assert!(grid(3, 3, Neighborhood::Moore, 0).validate(9).is_err());
    }
}
