//! Canonical model choice across seeded runs: the simplest run whose
//! validation macro-F1 is within one standard error of the best.

use alloc::vec::Vec;

use crate::gp::SurrogateModel;
use crate::{Error, Result};

/// One seeded run's champion and its summary numbers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub seed: u64,
    pub val_macro_f1: f64,
    /// Total node count across all programs.
    pub complexity: usize,
    pub depth: usize,
    pub unique_dims: usize,
    pub generations: usize,
    pub config_digest: u64,
    pub partition_digest: u64,
    pub model: SurrogateModel,
}

impl RunRecord {
    pub fn new(seed: u64, val_macro_f1: f64, generations: usize, config_digest: u64, model: SurrogateModel) -> Self {
        Self {
            seed,
            val_macro_f1,
            complexity: model.complexity(),
            depth: model.depth(),
            unique_dims: model.used_dims().len(),
            generations,
            config_digest,
            partition_digest: model.partition.digest(),
            model,
        }
    }

    /// Parsimony order: complexity, depth, unique dimensions, then model digest.
    pub fn key(&self) -> (usize, usize, usize, u64) {
        (self.complexity, self.depth, self.unique_dims, self.model.digest())
    }
}

/// Standard error of the mean, `sqrt(sum (m - mean)^2 / (R (R - 1)))`.
///
/// Scores are summed in sorted order so the result does not depend on the
/// order the runs were listed in.
pub fn se_of_runs(scores: &[f64]) -> Result<f64> {
    let r = scores.len();
    if r < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: r });
    }
    let mut scores = scores.to_vec();
    scores.sort_by(f64::total_cmp);
    let mean = scores.iter().sum::<f64>() / r as f64;
    let ss: f64 = scores.iter().map(|m| (m - mean) * (m - mean)).sum();
    Ok(libm::sqrt(ss / (r * (r - 1)) as f64))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Selection {
    /// Index of the chosen run in the input list.
    pub chosen: usize,
    pub chosen_seed: u64,
    pub best_f1: f64,
    /// Zero when fewer than two runs are given.
    pub se: f64,
    pub threshold: f64,
    pub feasible: Vec<bool>,
}

/// Apply the one-standard-error rule with lexicographic parsimony tie-breaks.
pub fn canonical(runs: &[RunRecord]) -> Result<Selection> {
    if runs.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let scores: Vec<f64> = runs.iter().map(|r| r.val_macro_f1).collect();
    let best_f1 = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let se = if runs.len() < 2 { 0.0 } else { se_of_runs(&scores)? };
    let threshold = best_f1 - se;
    let feasible: Vec<bool> = scores.iter().map(|&m| m >= threshold).collect();
    let keys: Vec<_> = runs.iter().map(RunRecord::key).collect();
    let chosen = (0..runs.len())
        .filter(|&i| feasible[i])
        .min_by_key(|&i| keys[i])
        .expect("the best run is always feasible");
    Ok(Selection { chosen, chosen_seed: runs[chosen].seed, best_f1, se, threshold, feasible })
}

/// Unweighted mean of per-class F1; a class with no predictions and no
/// support contributes 0.
pub fn macro_f1(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    if classes == 0 {
        return 0.0;
    }
    let mut tp = alloc::vec![0usize; classes];
    let mut fp = alloc::vec![0usize; classes];
    let mut fn_ = alloc::vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[t] += 1;
        } else {
            if p < classes {
                fp[p] += 1;
            }
            if t < classes {
                fn_[t] += 1;
            }
        }
    }
    let total: f64 = (0..classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 { 0.0 } else { 2.0 * tp[c] as f64 / denom as f64 }
        })
        .sum();
    total / classes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Program;
    use crate::spfp::ViewPartition;
    use alloc::vec;

    pub(crate) fn record(seed: u64, f1: f64, nodes: usize) -> RunRecord {
        // A chain of additions with `nodes` nodes (odd counts only).
        let mut text = alloc::string::String::from("d0");
        for _ in 0..(nodes.saturating_sub(1) / 2) {
            text = alloc::format!("plus({text}, d1)");
        }
        let genes = vec![Program::parse(&text).unwrap(), Program::dim(1)];
        let part = ViewPartition::from_views(vec![vec![0, 1]], 2).unwrap();
        let model = SurrogateModel::new(part, vec![genes], 1e-6).unwrap();
        RunRecord::new(seed, f1, 1, 0, model)
    }

    #[test]
    fn se_examples() {
        assert_eq!(se_of_runs(&[0.5, 0.5, 0.5]).unwrap(), 0.0);
        assert!((se_of_runs(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(se_of_runs(&[1.0]).is_err());
    }

    #[test]
    fn simpler_feasible_run_wins() {
        // The third run widens the SE enough to admit the second.
        let runs = [record(0, 0.90, 101), record(1, 0.89, 51), record(2, 0.86, 201)];
        let sel = canonical(&runs).unwrap();
        assert!(sel.se >= 0.01);
        assert_eq!(sel.chosen_seed, 1);
        let runs = [record(0, 0.90, 101), record(1, 0.80, 11), record(2, 0.89, 301)];
        let sel = canonical(&runs).unwrap();
        assert!(!sel.feasible[1]);
        assert_eq!(sel.chosen_seed, 0);
    }

    #[test]
    fn single_run_is_chosen() {
        let sel = canonical(&[record(4, 0.3, 5)]).unwrap();
        assert_eq!((sel.chosen, sel.se), (0, 0.0));
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2], 3), 1.0);
        let truth = [0, 0, 1, 1];
        let f = macro_f1(&[0, 0, 0, 0], &truth, 2);
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
    }
}
