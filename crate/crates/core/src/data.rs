//! Datasets: synthetic generators, CSV ingestion, fold splitting and centering.
//!
//! Random streams come from ChaCha8 seeded through `seed_from_u64`, and normal
//! draws use Box–Muller on that uniform stream, so a seed fixes the generated
//! data bit-for-bit on every platform.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, KgdError, Result};
use crate::scalar::Real;

/// Training pairs `(X, y)` plus optional prediction covariates and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Real> {
    pub x: DMatrix<T>,
    pub y: DVector<T>,
    pub x_test: Option<DMatrix<T>>,
    pub y_test: Option<DVector<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn new(x: DMatrix<T>, y: DVector<T>) -> Result<Self> {
        let d = Self { x, y, x_test: None, y_test: None };
        d.validate()?;
        Ok(d)
    }

    pub fn with_test(mut self, x_test: DMatrix<T>, y_test: Option<DVector<T>>) -> Result<Self> {
        self.x_test = Some(x_test);
        self.y_test = y_test;
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_test(&self) -> usize {
        self.x_test.as_ref().map_or(0, |m| m.nrows())
    }

    /// Prediction covariates, or an empty `0 × p` matrix.
    pub fn x_star(&self) -> DMatrix<T> {
        self.x_test.clone().unwrap_or_else(|| DMatrix::zeros(0, self.p()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.nrows() == 0 {
            return invalid("dataset needs at least one row");
        }
        if self.y.len() != self.x.nrows() {
            return invalid(format!("X has {} rows but y has {} entries", self.x.nrows(), self.y.len()));
        }
        if self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return invalid("training data has non-finite entries");
        }
        if let Some(xt) = &self.x_test {
            if xt.ncols() != self.x.ncols() {
                return invalid(format!(
                    "test covariates have {} columns, training has {}",
                    xt.ncols(),
                    self.x.ncols()
                ));
            }
            if xt.iter().any(|v| !v.is_finite()) {
                return invalid("test covariates have non-finite entries");
            }
            if let Some(yt) = &self.y_test {
                if yt.len() != xt.nrows() || yt.iter().any(|v| !v.is_finite()) {
                    return invalid("test response must be finite and match the test rows");
                }
            }
        } else if self.y_test.is_some() {
            return invalid("test response given without test covariates");
        }
        Ok(())
    }

    fn rows(x: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
        DMatrix::from_fn(idx.len(), x.ncols(), |r, c| x[(idx[r], c)])
    }

    /// Training rows selected by `idx`, without test data.
    pub fn subset(&self, idx: &[usize]) -> Dataset<T> {
        Dataset {
            x: Self::rows(&self.x, idx),
            y: DVector::from_fn(idx.len(), |r, _| self.y[idx[r]]),
            x_test: None,
            y_test: None,
        }
    }

    /// Converts every entry to another scalar type.
    pub fn cast<U: Real>(&self) -> Dataset<U> {
        let cm = |m: &DMatrix<T>| m.map(|v| U::of(v.as_f64()));
        let cv = |v: &DVector<T>| v.map(|e| U::of(e.as_f64()));
        Dataset {
            x: cm(&self.x),
            y: cv(&self.y),
            x_test: self.x_test.as_ref().map(cm),
            y_test: self.y_test.as_ref().map(cv),
        }
    }
}

/// Uniform and normal draws from a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct SeededStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller; both outputs of each pair are used.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn shuffle<E>(&mut self, items: &mut [E]) {
        items.shuffle(&mut self.rng);
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }
}

/// SplitMix64 finalizer; derives independent sub-seeds from one seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Piecewise linear/sine target: `x−1` below −1, `sin(10πx)` on `[−1, 1]`, `x+1` above 1.
pub fn f_linear_sine(x: f64) -> f64 {
    if x < -1.0 {
        x - 1.0
    } else if x <= 1.0 {
        (5.0 * 2.0 * PI * x).sin()
    } else {
        x + 1.0
    }
}

/// Two-frequency target: `sin(2πx)` on `[−2, 0]`, `sin(16πx)` on `(0, 1]`.
pub fn f_two_freq(x: f64) -> f64 {
    if x <= 0.0 {
        (2.0 * PI * x).sin()
    } else {
        (8.0 * 2.0 * PI * x).sin()
    }
}

/// Double-descent target `sin(2πx)`.
pub fn f_dd_sine(x: f64) -> f64 {
    (2.0 * PI * x).sin()
}

fn column<T: Real>(xs: &[f64], ys: &[f64]) -> Result<Dataset<T>> {
    Dataset::new(
        DMatrix::from_iterator(xs.len(), 1, xs.iter().map(|&v| T::of(v))),
        DVector::from_iterator(ys.len(), ys.iter().map(|&v| T::of(v))),
    )
}

fn noisy(stream: &mut SeededStream, xs: &[f64], f: fn(f64) -> f64, noise_sd: f64) -> Vec<f64> {
    xs.iter().map(|&x| f(x) + noise_sd * stream.normal()).collect()
}

/// `x ~ N(0, 1)`, `y = f_ls(x) + N(0, noise_sd²)`.
pub fn gen_linear_sine<T: Real>(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let mut s = SeededStream::new(seed);
    let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
    let ys = noisy(&mut s, &xs, f_linear_sine, noise_sd);
    column(&xs, &ys)
}

/// Stratified `n_low` draws from `U(−2, 0)` and `n_high` from `U(0, 1)`,
/// `y = f_2s(x) + N(0, noise_sd²)`. With the default 20/80 split both
/// frequencies get ten expected observations per period.
pub fn gen_two_freq<T: Real>(n_low: usize, n_high: usize, noise_sd: f64, seed: u64) -> Result<Dataset<T>> {
    if n_low + n_high == 0 {
        return invalid("at least one observation is required");
    }
    let mut s = SeededStream::new(seed);
    let mut xs: Vec<f64> = (0..n_low).map(|_| s.uniform_in(-2.0, 0.0)).collect();
    xs.extend((0..n_high).map(|_| s.uniform_in(0.0, 1.0)));
    let ys = noisy(&mut s, &xs, f_two_freq, noise_sd);
    column(&xs, &ys)
}

/// `x ~ U(−1, 1)`, `y = sin(2πx) + N(0, noise_sd²)`.
pub fn gen_dd_sine<T: Real>(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let mut s = SeededStream::new(seed);
    let xs: Vec<f64> = (0..n).map(|_| s.uniform_in(-1.0, 1.0)).collect();
    let ys = noisy(&mut s, &xs, f_dd_sine, noise_sd);
    column(&xs, &ys)
}

/// The three synthetic designs, with their default sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Synthetic {
    LinearSine,
    TwoFreq,
    DdSine,
}

pub const DEFAULT_NOISE_SD: f64 = 0.2;

impl Synthetic {
    pub fn id(self) -> &'static str {
        match self {
            Synthetic::LinearSine => "linear-sine",
            Synthetic::TwoFreq => "two-freq",
            Synthetic::DdSine => "dd-sine",
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        match id {
            "linear-sine" => Some(Synthetic::LinearSine),
            "two-freq" => Some(Synthetic::TwoFreq),
            "dd-sine" => Some(Synthetic::DdSine),
            _ => None,
        }
    }

    pub fn target(self, x: f64) -> f64 {
        match self {
            Synthetic::LinearSine => f_linear_sine(x),
            Synthetic::TwoFreq => f_two_freq(x),
            Synthetic::DdSine => f_dd_sine(x),
        }
    }

    /// Draws `scale` times the default design size.
    pub fn draw<T: Real>(self, scale: usize, noise_sd: f64, seed: u64) -> Result<Dataset<T>> {
        match self {
            Synthetic::LinearSine => gen_linear_sine(100 * scale, noise_sd, seed),
            Synthetic::TwoFreq => gen_two_freq(20 * scale, 80 * scale, noise_sd, seed),
            Synthetic::DdSine => gen_dd_sine(20 * scale, noise_sd, seed),
        }
    }

    /// Default-size training set plus an independent test set `test_scale`
    /// times as large, both drawn with the same noise level.
    pub fn train_test<T: Real>(self, noise_sd: f64, test_scale: usize, seed: u64) -> Result<Dataset<T>> {
        let train = self.draw::<T>(1, noise_sd, derive_seed(seed, 0))?;
        let test = self.draw::<T>(test_scale, noise_sd, derive_seed(seed, 1))?;
        train.with_test(test.x, Some(test.y))
    }
}

/// Result of [`load_csv`].
#[derive(Debug, Clone)]
pub struct LoadedCsv<T: Real> {
    pub data: Dataset<T>,
    /// Rows skipped because the response cell was empty.
    pub dropped: usize,
    /// Values of extra (non-covariate, non-response) columns kept for grouping, by name.
    pub extra: HashMap<String, Vec<String>>,
}

/// Reads a headered, comma-separated file. Rows with an empty response are
/// dropped; every other cell of the selected columns must parse as a number.
/// `keep` names further columns whose raw text is returned alongside.
pub fn load_csv<T: Real>(
    path: impl AsRef<Path>,
    x_columns: &[&str],
    y_column: &str,
    keep: &[&str],
) -> Result<LoadedCsv<T>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, x_columns, y_column, keep)
}

pub fn read_csv<T: Real, R: std::io::Read>(
    reader: R,
    x_columns: &[&str],
    y_column: &str,
    keep: &[&str],
) -> Result<LoadedCsv<T>> {
    if x_columns.is_empty() {
        return invalid("at least one covariate column is required");
    }
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| KgdError::Schema(format!("missing column '{name}'")))
    };
    let x_idx: Vec<usize> = x_columns.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let y_idx = find(y_column)?;
    let keep_idx: Vec<usize> = keep.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let mut xs: Vec<T> = Vec::new();
    let mut ys: Vec<T> = Vec::new();
    let mut extra: Vec<Vec<String>> = vec![Vec::new(); keep.len()];
    let mut dropped = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2; // 1-based line number, header on line 1
        let y_cell = rec.get(y_idx).unwrap_or("");
        if y_cell.is_empty() {
            dropped += 1;
            continue;
        }
        let parse = |cell: &str, col: &str| -> Result<T> {
            cell.parse::<f64>().ok().filter(|v| v.is_finite()).map(T::of).ok_or_else(|| KgdError::Parse {
                row,
                column: col.to_string(),
                message: format!("'{cell}' is not a finite number"),
            })
        };
        ys.push(parse(y_cell, y_column)?);
        for (&c, name) in x_idx.iter().zip(x_columns) {
            xs.push(parse(rec.get(c).unwrap_or(""), name)?);
        }
        for (k, &c) in keep_idx.iter().enumerate() {
            extra[k].push(rec.get(c).unwrap_or("").to_string());
        }
    }
    if ys.is_empty() {
        return invalid("no rows with a response value");
    }
    let n = ys.len();
    let data = Dataset::new(DMatrix::from_row_slice(n, x_columns.len(), &xs), DVector::from_vec(ys))?;
    Ok(LoadedCsv { data, dropped, extra: keep.iter().map(|s| s.to_string()).zip(extra).collect() })
}

/// One cross-validation split.
#[derive(Debug, Clone)]
pub struct Split<T: Real> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    pub test_rows: Vec<usize>,
}

impl<T: Real> Split<T> {
    /// Training data carrying the held-out fold as prediction covariates and targets.
    pub fn combined(&self) -> Dataset<T> {
        Dataset {
            x: self.train.x.clone(),
            y: self.train.y.clone(),
            x_test: Some(self.test.x.clone()),
            y_test: Some(self.test.y.clone()),
        }
    }
}

/// Random partition into `k` folds whose sizes differ by at most one; each
/// fold is the test set of exactly one split.
pub fn kfold_split<T: Real>(data: &Dataset<T>, k: usize, seed: u64) -> Result<Vec<Split<T>>> {
    let n = data.n();
    if k < 2 {
        return invalid("k must be at least 2");
    }
    if n < k {
        return invalid(format!("cannot split {n} rows into {k} folds"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    SeededStream::new(seed).shuffle(&mut perm);
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    let mut splits = Vec::with_capacity(k);
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test_rows = perm[start..start + size].to_vec();
        test_rows.sort_unstable();
        start += size;
        let mut in_test = vec![false; n];
        for &r in &test_rows {
            in_test[r] = true;
        }
        let train_rows: Vec<usize> = (0..n).filter(|&r| !in_test[r]).collect();
        splits.push(Split { train: data.subset(&train_rows), test: data.subset(&test_rows), test_rows });
    }
    Ok(splits)
}

/// Means removed by [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Centering<T: Real> {
    pub y_mean: T,
    pub x_means: Option<DVector<T>>,
}

impl<T: Real> Centering<T> {
    pub fn restore_y(&self, v: &DVector<T>) -> DVector<T> {
        v.add_scalar(self.y_mean)
    }

    pub fn restore_x(&self, x: &DMatrix<T>) -> DMatrix<T> {
        match &self.x_means {
            None => x.clone(),
            Some(m) => {
                let mut out = x.clone();
                for mut row in out.row_iter_mut() {
                    row += m.transpose();
                }
                out
            }
        }
    }
}

/// Subtracts the training mean of `y` (and optionally of each column of `X`)
/// from both training and test data.
pub fn standardize<T: Real>(data: &Dataset<T>, center_x: bool) -> (Dataset<T>, Centering<T>) {
    let y_mean = data.y.mean();
    let x_means = center_x.then(|| DVector::from_fn(data.p(), |c, _| data.x.column(c).mean()));
    let shift_x = |x: &DMatrix<T>| match &x_means {
        None => x.clone(),
        Some(m) => {
            let mut out = x.clone();
            for mut row in out.row_iter_mut() {
                row -= m.transpose();
            }
            out
        }
    };
    let out = Dataset {
        x: shift_x(&data.x),
        y: data.y.add_scalar(-y_mean),
        x_test: data.x_test.as_ref().map(shift_x),
        y_test: data.y_test.as_ref().map(|v| v.add_scalar(-y_mean)),
    };
    (out, Centering { y_mean, x_means })
}
