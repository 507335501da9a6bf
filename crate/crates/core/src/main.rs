use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gp_core::datasets::read_csv_samples;
use gp_core::experiment::{compare, read_summary, run_experiment, Overrides};
use gp_core::learners::LearnerKind;
use gp_core::{GpError, Result, Tree};

/// Genetic programming experiment runner.
#[derive(Debug, Parser)]
#[command(name = "gp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every repetition of an experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluation workers; defaults to the config's n_jobs, then hardware parallelism.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        /// Run repetitions concurrently (same output).
        #[arg(long)]
        parallel_reps: bool,
    },
    /// Paired comparison of two summary.csv files.
    Compare { a: PathBuf, b: PathBuf },
    /// Score serialized trees (one per line) on every row of a CSV file.
    Eval {
        tree_file: PathBuf,
        csv: PathBuf,
        /// Target column name.
        #[arg(long, default_value = "y")]
        label: String,
        /// RegressorLS, BinaryClassifier or Denoiser.
        #[arg(long, default_value = "RegressorLS")]
        learner: String,
    },
}

fn eval_trees(tree_file: &Path, csv: &Path, label: &str, learner: &str) -> Result<()> {
    let learner: LearnerKind = learner.parse()?;
    let samples = read_csv_samples(csv, label, learner)?;
    if samples.is_empty() {
        return Err(GpError::Usage(format!("{}: no data rows", csv.display())));
    }
    let text = std::fs::read_to_string(tree_file)?;
    let width = samples[0].x.len();
    println!("line,size,depth,{}", learner.metric_name());
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let tree = Tree::parse(line, None)?;
        tree.validate(width)?;
        let metric = learner.test_metric(&tree.compile(), &samples)?;
        println!("{},{},{},{}", i + 1, tree.size(), tree.depth(), metric);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            jobs,
            reps,
            parallel_reps,
        } => {
            let overrides = Overrides {
                seed,
                jobs,
                reps,
                parallel_reps,
            };
            run_experiment(&config, &out, &overrides).map(|_| ())
        }
        Command::Compare { a, b } => {
            let report = compare(&read_summary(a)?, &read_summary(b)?)?;
            report.write_report(std::io::stdout().lock())
        }
        Command::Eval {
            tree_file,
            csv,
            label,
            learner,
        } => eval_trees(&tree_file, &csv, &label, &learner),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
