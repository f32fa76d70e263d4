//! Synthetic embeddings: Gaussian class blobs in a few informative
//! coordinates scattered among standard-normal noise coordinates.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{EmbeddingDataset, Split};
use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    pub informative: usize,
    /// Mean shift of a class on each of its informative coordinates.
    pub shift: f64,
    /// Rows tagged test; the rest are train.
    pub test: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n: 1200, d: 64, classes: 3, informative: 8, shift: 2.0, test: 240, seed: 0 }
    }
}

/// Dataset plus the coordinates that carry class signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub dataset: EmbeddingDataset,
    /// `informative[i]` is shifted for class `i % classes`.
    pub informative: Vec<usize>,
}

/// Balanced labels; informative coordinate `i` has mean `shift` for class
/// `i % classes` and 0 otherwise, with unit variance everywhere.
pub fn generate(config: &SynthConfig) -> Result<Synthetic> {
    let SynthConfig { n, d, classes, informative, shift, test, seed } = *config;
    if classes < 2 || informative > d || informative < classes || test >= n || n < classes {
        return Err(Error::InvalidArgument(alloc::format!("unusable synthetic configuration {config:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims: Vec<usize> = (0..d).collect();
    dims.shuffle(&mut rng);
    let mut chosen: Vec<usize> = dims[..informative].to_vec();
    chosen.sort_unstable();
    let mut y: Vec<usize> = (0..n).map(|i| i % classes).collect();
    y.shuffle(&mut rng);
    let mut x = Matrix::zeros(n, d);
    for (i, &label) in y.iter().enumerate() {
        let row = x.row_mut(i);
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (k, &j) in chosen.iter().enumerate() {
            if k % classes == label {
                row[j] += shift;
            }
        }
    }
    let split = (0..n).map(|i| if i < n - test { Split::Train } else { Split::Test }).collect();
    let dataset = EmbeddingDataset::new("synthetic", x, y, split, classes, None)?;
    Ok(Synthetic { dataset, informative: chosen })
}
