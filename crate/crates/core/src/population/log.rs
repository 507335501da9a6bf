use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const RUNLOG_HEADER: &str =
    "generation,best_train,best_test,mean_fitness,evaluations,elapsed_s";

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub generation: usize,
    /// Fitness of the generation's best individual on the current batch.
    pub best_train: f64,
    /// Test metric of that individual (accuracy or MSE); NaN without a test split.
    pub best_test: f64,
    pub mean_fitness: f64,
    /// Cumulative single-sample evaluations spent on training fitness.
    pub evaluations: u64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{RUNLOG_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                r.generation, r.best_train, r.best_test, r.mean_fitness, r.evaluations, r.elapsed_s
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// The log with every elapsed time zeroed, for comparisons across runs.
    pub fn without_timing(&self) -> RunLog {
        RunLog {
            rows: self
                .rows
                .iter()
                .map(|r| LogRow {
                    elapsed_s: 0.0,
                    ..r.clone()
                })
                .collect(),
        }
    }
}
