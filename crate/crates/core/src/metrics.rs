//! Discrimination metrics and across-run intervals.

use alloc::vec::Vec;

use crate::matrix::Matrix;
use crate::special::t_critical_975;
use crate::{Error, Result};

/// Midranks (1-based) of `values`; tied values share the average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Rank-based AUC of `scores` for the positive rows, or `None` when either
/// group is empty.
pub fn auc_binary(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let ranks = midranks(scores);
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let rank_sum: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroAuc {
    pub auc: f64,
    /// Classes absent from the labels (or present in every row), left out of the mean.
    pub skipped: Vec<usize>,
}

/// One-vs-rest AUC per class, averaged without weights.
pub fn auc_macro_ovr(p: &Matrix, y: &[usize]) -> Result<MacroAuc> {
    let k = p.cols();
    if k < 2 {
        return Err(Error::InvalidArgument("AUC needs at least two classes".into()));
    }
    if y.len() != p.rows() {
        return Err(Error::Shape { expected: p.rows(), found: y.len() });
    }
    let mut skipped = Vec::new();
    let mut total = 0.0;
    let mut used = 0;
    for c in 0..k {
        let positive: Vec<bool> = y.iter().map(|&t| t == c).collect();
        match auc_binary(&p.column(c), &positive) {
            Some(a) => {
                total += a;
                used += 1;
            }
            None => skipped.push(c),
        }
    }
    if used == 0 {
        return Err(Error::InvalidArgument("no class has both positive and negative rows".into()));
    }
    Ok(MacroAuc { auc: total / used as f64, skipped })
}

/// Mean and 95% t-interval halfwidth over runs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunSummary {
    pub mean: f64,
    pub halfwidth: f64,
    pub runs: usize,
}

/// `mean +- t(0.975, R-1) * s / sqrt(R)` with the sample standard deviation `s`.
pub fn t_interval(values: &[f64]) -> Result<RunSummary> {
    let r = values.len();
    if r < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: r });
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1) as f64;
    let halfwidth = t_critical_975(r - 1) * libm::sqrt(var) / libm::sqrt(r as f64);
    Ok(RunSummary { mean, halfwidth, runs: r })
}
