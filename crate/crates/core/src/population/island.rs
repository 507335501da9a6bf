use serde::{Deserialize, Serialize};

use super::selection::ranked;
use crate::error::{GpError, Result};
use crate::learners::Individual;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Island `i` sends to island `(i + 1) mod n`.
    #[default]
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IslandConfig {
    pub n_islands: usize,
    pub island_pop: usize,
    /// Generations between migrations.
    pub migration_interval: usize,
    pub n_migrants: usize,
    pub topology: Topology,
}

impl IslandConfig {
    /// Interval 10 and 5% of the island as migrants (at least one).
    pub fn with_defaults(n_islands: usize, island_pop: usize) -> Self {
        IslandConfig {
            n_islands,
            island_pop,
            migration_interval: 10,
            n_migrants: (island_pop / 20).max(1).min(island_pop.saturating_sub(1)),
            topology: Topology::Ring,
        }
    }

    pub fn validate(&self, pop_size: usize) -> Result<()> {
        if self.n_islands == 0 || self.n_islands * self.island_pop != pop_size {
            return Err(GpError::Config(format!(
                "{} islands x {} individuals != population {pop_size}",
                self.n_islands, self.island_pop
            )));
        }
        if self.n_migrants >= self.island_pop {
            return Err(GpError::Config(format!(
                "n_migrants {} must be below island_pop {}",
                self.n_migrants, self.island_pop
            )));
        }
        if self.migration_interval == 0 {
            return Err(GpError::Config(
                "migration_interval must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Ring migration: every island sends copies of its `n_migrants` best to the
/// next island, which drops its `n_migrants` worst to make room. Emigrants
/// are all chosen before any island is modified.
pub fn migrate(islands: &mut [Vec<Individual>], cfg: &IslandConfig) {
    let m = cfg.n_migrants;
    let n = islands.len();
    if m == 0 || n == 0 {
        return;
    }
    let emigrants: Vec<Vec<Individual>> = islands
        .iter()
        .map(|isl| {
            ranked(isl)
                .into_iter()
                .take(m)
                .map(|i| isl[i].clone())
                .collect()
        })
        .collect();
    for (src, group) in emigrants.into_iter().enumerate() {
        let dest = match cfg.topology {
            Topology::Ring => (src + 1) % n,
        };
        let island = &mut islands[dest];
        let order = ranked(island);
        for (slot, migrant) in order.into_iter().rev().take(m).zip(group) {
            island[slot] = migrant;
        }
    }
}
