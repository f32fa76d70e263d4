//! Embedding dataset container, train-only standardization, within-tower
//! pooling and stratified validation splits.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;
use crate::{Error, Result};

/// Default additive guard in the z-score denominator.
pub const ZSCORE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Split> {
        match code {
            0 => Some(Split::Train),
            1 => Some(Split::Val),
            2 => Some(Split::Test),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn from_name(name: &str) -> Option<Split> {
        match name {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Embedding matrix with labels and frozen split tags.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    pub name: String,
    pub x: Matrix,
    pub y: Vec<usize>,
    pub split: Vec<Split>,
    pub classes: usize,
    /// First coordinate of the second tower for two-tower embeddings.
    pub tower_boundary: Option<usize>,
}

impl EmbeddingDataset {
    /// Build and check shape and label invariants.
    pub fn new(
        name: impl Into<String>,
        x: Matrix,
        y: Vec<usize>,
        split: Vec<Split>,
        classes: usize,
        tower_boundary: Option<usize>,
    ) -> Result<Self> {
        let ds = Self { name: name.into(), x, y, split, classes, tower_boundary };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// Shape, label-range and label-coverage checks.
    pub fn validate(&self) -> Result<()> {
        let n = self.x.rows();
        if self.y.len() != n {
            return Err(Error::Shape { expected: n, found: self.y.len() });
        }
        if self.split.len() != n {
            return Err(Error::Shape { expected: n, found: self.split.len() });
        }
        if self.classes == 0 {
            return Err(Error::Dataset("class count must be positive".into()));
        }
        let mut seen = vec![false; self.classes];
        for &label in &self.y {
            if label >= self.classes {
                return Err(Error::LabelOutOfRange { label: label as u32, classes: self.classes as u32 });
            }
            seen[label] = true;
        }
        if n > 0 {
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::Dataset(format!("labels do not cover [0, {}): class {missing} absent", self.classes)));
            }
        }
        if let Some(b) = self.tower_boundary {
            if b == 0 || b >= self.d() {
                return Err(Error::Dataset(format!("tower boundary {b} outside (0, {})", self.d())));
            }
        }
        Ok(())
    }

    /// Additionally require non-empty train, validation and test splits.
    pub fn validate_for_pipeline(&self) -> Result<()> {
        self.validate()?;
        for s in [Split::Train, Split::Val, Split::Test] {
            if !self.split.contains(&s) {
                return Err(Error::Dataset(format!("{} split is empty", s.name())));
            }
        }
        Ok(())
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.split.iter().enumerate().filter(|(_, s)| **s == split).map(|(i, _)| i).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.split.iter().filter(|s| **s == split).count()
    }

    /// Rows and labels of one split.
    pub fn subset(&self, split: Split) -> (Matrix, Vec<usize>) {
        let idx = self.indices(split);
        let y = idx.iter().map(|&i| self.y[i]).collect();
        (self.x.select_rows(&idx), y)
    }
}

/// Per-dimension training mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZScoreStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub epsilon: f64,
}

impl ZScoreStats {
    /// Fit on the training rows of `ds` only.
    pub fn fit(ds: &EmbeddingDataset) -> Result<Self> {
        Self::fit_rows(&ds.x, &ds.indices(Split::Train), ZSCORE_EPSILON)
    }

    /// Two-pass mean / population variance over the listed rows.
    pub fn fit_rows(x: &Matrix, rows: &[usize], epsilon: f64) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: rows.len() });
        }
        if epsilon <= 0.0 {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        let d = x.cols();
        let n = rows.len() as f64;
        let mut mu = vec![0.0; d];
        for &i in rows {
            for (m, v) in mu.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mu.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for &i in rows {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mu) {
                let c = v - m;
                *s += c * c;
            }
        }
        let sigma = var.into_iter().map(|s| libm::sqrt(s / n)).collect();
        Ok(Self { mu, sigma, epsilon })
    }

    /// `(x - mu) / (sigma + epsilon)` elementwise.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mu.len() {
            return Err(Error::Shape { expected: self.mu.len(), found: x.cols() });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mu).zip(&self.sigma) {
                *v = (*v - m) / (s + self.epsilon);
            }
        }
        Ok(out)
    }
}

/// Non-overlapping 2:1 average pooling along the feature axis, done
/// separately inside each tower. Returns the pooled matrix and the pooled
/// tower boundary.
pub fn pool_2to1(x: &Matrix, tower_boundary: Option<usize>) -> Result<(Matrix, Option<usize>)> {
    let d = x.cols();
    let towers: Vec<(usize, usize)> = match tower_boundary {
        Some(b) if b == 0 || b >= d => {
            return Err(Error::InvalidArgument(format!("tower boundary {b} outside (0, {d})")));
        }
        Some(b) => vec![(0, b), (b, d)],
        None => vec![(0, d)],
    };
    for &(lo, hi) in &towers {
        if (hi - lo) % 2 != 0 {
            return Err(Error::InvalidArgument(format!("tower [{lo}, {hi}) has odd width {}", hi - lo)));
        }
    }
    let out_d = d / 2;
    let mut out = Matrix::zeros(x.rows(), out_d);
    for i in 0..x.rows() {
        let src = x.row(i);
        let dst = out.row_mut(i);
        let mut k = 0;
        for &(lo, hi) in &towers {
            for j in (lo..hi).step_by(2) {
                dst[k] = (src[j] + src[j + 1]) / 2.0;
                k += 1;
            }
        }
    }
    Ok((out, tower_boundary.map(|b| b / 2)))
}

/// Number of validation rows for `n_train` rows: `ceil(fraction * n_train)`.
pub fn val_count(n_train: usize, val_fraction: f64) -> usize {
    // The small slack absorbs representation error such as 0.1 * 30 = 3.0000000000000004.
    libm::ceil(val_fraction * n_train as f64 - 1e-9).max(0.0) as usize
}

/// Re-tag a stratified `val_fraction` of the training rows as validation.
///
/// Per-class quotas are the floors of `fraction * n_class`, topped up by
/// largest remainder until they sum to `ceil(fraction * n_train)`, so every
/// class lands within one row of the global fraction.
pub fn make_splits(ds: &EmbeddingDataset, val_fraction: f64, seed: u64) -> Result<EmbeddingDataset> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("validation fraction {val_fraction} outside (0, 1)")));
    }
    if ds.split.contains(&Split::Val) {
        return Err(Error::Dataset("dataset already has validation rows".into()));
    }
    let train = ds.indices(Split::Train);
    let total = val_count(train.len(), val_fraction);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes];
    for &i in &train {
        by_class[ds.y[i]].push(i);
    }
    let mut quota: Vec<usize> = by_class
        .iter()
        .map(|rows| libm::floor(val_fraction * rows.len() as f64) as usize)
        .collect();
    let mut order: Vec<usize> = (0..ds.classes).collect();
    let frac = |c: usize| {
        let ideal = val_fraction * by_class[c].len() as f64;
        ideal - libm::floor(ideal)
    };
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    let mut assigned: usize = quota.iter().sum();
    for &c in order.iter().cycle().take(ds.classes * 2) {
        if assigned >= total {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            assigned += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for (rows, &q) in by_class.iter_mut().zip(&quota) {
        rows.shuffle(&mut rng);
        for &i in rows.iter().take(q) {
            out.split[i] = Split::Val;
        }
    }
    Ok(out)
}
