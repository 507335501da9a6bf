//! Data sources: CSV tables, the Keijzer-12 generator, a synthetic noisy
//! patch generator, and the mini-batch iterator.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{GpError, Result};
use crate::learners::LearnerKind;
use crate::scheduler::{rng_stream, GpRng};
use crate::tree::{Sample, Window};

/// Share of rows used for training when a CSV split is not given (1200 of 1372).
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.875;

#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Sample>,
    input_size: usize,
    task: LearnerKind,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Dataset {
    /// Checks uniform input width and that `train`/`test` partition the samples.
    pub fn new(
        samples: Vec<Sample>,
        task: LearnerKind,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let input_size = samples
            .first()
            .map(|s| s.x.len())
            .ok_or_else(|| GpError::Config("dataset has no samples".into()))?;
        if input_size == 0 {
            return Err(GpError::Config("samples have no features".into()));
        }
        if let Some(i) = samples.iter().position(|s| s.x.len() != input_size) {
            return Err(GpError::Config(format!(
                "sample {i} has {} features, expected {input_size}",
                samples[i].x.len()
            )));
        }
        let mut seen = vec![false; samples.len()];
        for &i in train.iter().chain(&test) {
            match seen.get_mut(i) {
                Some(s) if !*s => *s = true,
                Some(_) => {
                    return Err(GpError::Config(format!(
                        "sample {i} appears in both splits"
                    )))
                }
                None => return Err(GpError::Config(format!("split index {i} out of range"))),
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(GpError::Config(
                "train/test splits do not cover the dataset".into(),
            ));
        }
        if task == LearnerKind::BinaryClassifier {
            if let Some(i) = samples.iter().position(|s| s.y != 0.0 && s.y != 1.0) {
                return Err(GpError::Config(format!(
                    "sample {i}: label {} is not 0 or 1",
                    samples[i].y
                )));
            }
        }
        Ok(Dataset {
            samples,
            input_size,
            task,
            train,
            test,
        })
    }

    /// All samples in the training split.
    pub fn train_only(samples: Vec<Sample>, task: LearnerKind) -> Result<Self> {
        let train = (0..samples.len()).collect();
        Self::new(samples, task, train, Vec::new())
    }

    /// Concatenates separately generated train and test sets.
    pub fn from_train_test(
        train: Vec<Sample>,
        test: Vec<Sample>,
        task: LearnerKind,
    ) -> Result<Self> {
        let n_train = train.len();
        let n = n_train + test.len();
        let mut samples = train;
        samples.extend(test);
        Self::new(
            samples,
            task,
            (0..n_train).collect(),
            (n_train..n).collect(),
        )
    }

    /// Uses `other`'s samples as this dataset's test split.
    pub fn with_test(self, other: Dataset) -> Result<Self> {
        Self::from_train_test(self.samples, other.samples, self.task)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn task(&self) -> LearnerKind {
        self.task
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn select(&self, indices: &[usize]) -> Vec<&Sample> {
        indices.iter().map(|&i| &self.samples[i]).collect()
    }

    pub fn train_samples(&self) -> Vec<&Sample> {
        self.select(&self.train)
    }

    pub fn test_samples(&self) -> Vec<&Sample> {
        self.select(&self.test)
    }
}

/// How to read a CSV file into a [`Dataset`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label: String,
    pub task: LearnerKind,
    /// Training rows; defaults to [`DEFAULT_TRAIN_FRACTION`] of the file.
    pub n_train: Option<usize>,
    pub split_seed: u64,
    /// Standardize features with training-split statistics.
    pub standardize: bool,
}

impl CsvOptions {
    pub fn new(label: impl Into<String>, task: LearnerKind) -> Self {
        CsvOptions {
            label: label.into(),
            task,
            n_train: None,
            split_seed: 0,
            standardize: true,
        }
    }
}

/// Loads a numeric CSV with a header row. Non-label columns become features
/// in file order. Rows are split train/test by a seeded permutation.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let mut samples = read_csv_samples(path, &opts.label, opts.task)?;
    let n = samples.len();
    if n < 2 {
        return Err(GpError::Config(format!(
            "{}: {n} data row(s) cannot be split into train and test",
            path.display()
        )));
    }
    let n_train = opts
        .n_train
        .unwrap_or((n as f64 * DEFAULT_TRAIN_FRACTION).floor() as usize);
    if n_train == 0 || n_train >= n {
        return Err(GpError::Config(format!(
            "{}: n_train {n_train} must be in 1..{n}",
            path.display()
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_stream(opts.split_seed, 0));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();

    if opts.standardize {
        standardize(&mut samples, &train);
    }
    Dataset::new(samples, opts.task, train, test)
}

/// Reads every row of a numeric CSV with a header into samples, with
/// row/column diagnostics for malformed input.
pub fn read_csv_samples(
    path: impl AsRef<Path>,
    label: &str,
    task: LearnerKind,
) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let load_err = |row: usize, column: &str, msg: String| GpError::Load {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| load_err(0, "-", e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| load_err(1, "-", e.to_string()))?
        .clone();
    let label_col = headers
        .iter()
        .position(|h| h == label)
        .ok_or_else(|| load_err(1, label, "label column not found in header".into()))?;

    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            load_err(row, "-", e.to_string())
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut x = Vec::with_capacity(headers.len() - 1);
        let mut y = 0.0;
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| load_err(row, &headers[c], format!("non-numeric cell '{cell}'")))?;
            if c == label_col {
                y = v;
            } else {
                x.push(v);
            }
        }
        if task == LearnerKind::BinaryClassifier && y != 0.0 && y != 1.0 {
            return Err(load_err(row, label, format!("label {y} is not 0 or 1")));
        }
        samples.push(Sample::new(x, y));
    }
    Ok(samples)
}

/// Scales every feature to zero mean and unit variance using statistics of
/// the `fit` rows only. Constant features are only centered.
pub fn standardize(samples: &mut [Sample], fit: &[usize]) {
    let d = samples[0].x.len();
    let n = fit.len() as f64;
    for j in 0..d {
        let mean = fit.iter().map(|&i| samples[i].x[j]).sum::<f64>() / n;
        let var = fit
            .iter()
            .map(|&i| (samples[i].x[j] - mean).powi(2))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        for s in samples.iter_mut() {
            s.x[j] = (s.x[j] - mean) / scale;
        }
    }
}

pub fn keijzer12(x: f64, y: f64) -> f64 {
    x * y + ((x - 1.0) * (y - 1.0)).sin()
}

/// `n` points uniform in `[lo, hi]^2` labelled with [`keijzer12`], all in the training split.
pub fn gen_keijzer12(n: usize, seed: u64, lo: f64, hi: f64) -> Result<Dataset> {
    if n == 0 || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(GpError::Config(format!(
            "keijzer12 needs n >= 1 and lo < hi (got n={n}, lo={lo}, hi={hi})"
        )));
    }
    let mut rng = rng_stream(seed, 0);
    let samples = (0..n)
        .map(|_| {
            let x = rng.random_range(lo..=hi);
            let y = rng.random_range(lo..=hi);
            Sample::new(vec![x, y], keijzer12(x, y))
        })
        .collect();
    Dataset::train_only(samples, LearnerKind::RegressorLS)
}

/// Parameters of the smooth random field behind synthetic patches.
const FIELD_WAVES: usize = 3;
const FIELD_AMPLITUDE: (f64, f64) = (0.05, 0.25);
const FIELD_FREQUENCY: (f64, f64) = (0.05, 0.5);
const FIELD_OFFSET: (f64, f64) = (0.3, 0.7);

/// Noisy flattened square patches with the clean center pixel as target.
///
/// Pixels are flattened in [`concentric_order`], so the center pixel is `x0`
/// and every centered square or ring is a contiguous window.
///
/// The clean patch is an offset plus three sinusoids of random orientation,
/// frequency (radians per pixel) and phase, clipped to `[0, 1]`. Features add
/// i.i.d. N(0, sigma^2) noise to every pixel.
pub fn gen_noisy_patches(n: usize, patch_side: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || patch_side.is_multiple_of(2) {
        return Err(GpError::Config(format!(
            "noisy patches need n >= 1 and an odd side (got n={n}, side={patch_side})"
        )));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(GpError::Config(format!("noise sigma {sigma} must be >= 0")));
    }
    let mut rng = rng_stream(seed, 0);
    let noise = Normal::new(0.0, sigma).expect("sigma checked");
    let c = (patch_side / 2) as f64;
    let order = concentric_order(patch_side);
    let samples = (0..n)
        .map(|_| {
            let offset = rng.random_range(FIELD_OFFSET.0..FIELD_OFFSET.1);
            let waves: Vec<(f64, f64, f64, f64, f64)> = (0..FIELD_WAVES)
                .map(|_| {
                    let amp = rng.random_range(FIELD_AMPLITUDE.0..FIELD_AMPLITUDE.1);
                    let freq = rng.random_range(FIELD_FREQUENCY.0..FIELD_FREQUENCY.1);
                    let theta = rng.random_range(0.0..std::f64::consts::PI);
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    (amp, freq, theta.cos(), theta.sin(), phase)
                })
                .collect();
            let clean: Vec<f64> = order
                .iter()
                .map(|&(r, col)| {
                    let (r, col) = (r as f64 - c, col as f64 - c);
                    let v = offset
                        + waves
                            .iter()
                            .map(|&(a, f, ct, st, ph)| a * (f * (r * ct + col * st) + ph).sin())
                            .sum::<f64>();
                    v.clamp(0.0, 1.0)
                })
                .collect();
            let target = clean[0];
            let x = clean
                .into_iter()
                .map(|v| v + noise.sample(&mut rng))
                .collect();
            Sample::new(x, target)
        })
        .collect();
    Dataset::train_only(samples, LearnerKind::Denoiser)
}

/// Pixel `(row, col)` coordinates of a `side x side` patch ordered by
/// Chebyshev ring around the center, then row-major within a ring.
pub fn concentric_order(side: usize) -> Vec<(usize, usize)> {
    let c = (side / 2) as isize;
    let ring = |&(r, col): &(usize, usize)| (r as isize - c).abs().max((col as isize - c).abs());
    let mut cells: Vec<(usize, usize)> = (0..side)
        .flat_map(|r| (0..side).map(move |col| (r, col)))
        .collect();
    cells.sort_by_key(|cell| (ring(cell), *cell));
    cells
}

/// Windows over a concentric-order patch: every centered square of odd side,
/// followed by every ring of radius at least one.
pub fn concentric_windows(side: usize) -> Vec<Window> {
    let radius = side / 2;
    let area = |r: usize| (2 * r + 1) * (2 * r + 1);
    let squares = (0..=radius).map(|r| Window {
        start: 0,
        len: area(r),
    });
    let rings = (1..=radius).map(|r| Window {
        start: area(r - 1),
        len: area(r) - area(r - 1),
    });
    squares.chain(rings).collect()
}

/// One mini-batch: a batch id and the sample indices it covers, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub id: u64,
    pub indices: Vec<usize>,
}

/// Walks seeded permutations of the training split in consecutive blocks.
/// The last block of an epoch holds the remainder when the batch size does
/// not divide the split.
#[derive(Debug, Clone)]
pub struct BatchIterator {
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
    rng: GpRng,
    next_id: u64,
}

impl BatchIterator {
    /// Batch ids start at `first_id` and increase by one per batch.
    pub fn new(train: &[usize], batch_size: usize, seed: u64, first_id: u64) -> Result<Self> {
        if batch_size == 0 || batch_size > train.len() {
            return Err(GpError::Config(format!(
                "batch size {batch_size} must be in 1..={}",
                train.len()
            )));
        }
        let mut rng = rng_stream(seed, 0);
        let mut order = train.to_vec();
        order.shuffle(&mut rng);
        Ok(BatchIterator {
            order,
            batch_size,
            cursor: 0,
            rng,
            next_id: first_id,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn next_batch(&mut self) -> Batch {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let mut indices = self.order[self.cursor..end].to_vec();
        indices.sort_unstable();
        self.cursor = end;
        let id = self.next_id;
        self.next_id += 1;
        Batch { id, indices }
    }
}
