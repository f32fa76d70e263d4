//! Temperature scaling, reliability bins and probability-quality scores.

use alloc::vec;
use alloc::vec::Vec;

use crate::gp::{softmax_ce, softmax_in_place, PROB_CLIP};
use crate::matrix::Matrix;
use crate::special::clopper_pearson;
use crate::{Error, Result};

pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 20.0;
/// Golden-section tolerance on `ln T`.
pub const LN_T_TOL: f64 = 1e-4;
pub const N_BINS: usize = 20;

/// Validation NLL of `softmax(z / t)`.
pub fn nll_at(z: &Matrix, y: &[usize], t: f64) -> Result<f64> {
    softmax_ce(&z.map(|v| v / t), y)
}

/// Temperature minimizing validation NLL over `[0.05, 20]`.
///
/// Falls back to `T = 1` when every row's logits are equal, or when the
/// search optimum is no better than `T = 1`.
pub fn fit_temperature(z: &Matrix, y: &[usize]) -> Result<f64> {
    if z.cols() < 2 {
        return Err(Error::InvalidArgument("temperature scaling needs at least two classes".into()));
    }
    let degenerate = z.rows_iter().all(|r| r.iter().all(|&v| v == r[0]));
    if degenerate {
        return Ok(1.0);
    }
    let f = |u: f64| nll_at(z, y, libm::exp(u));
    let invphi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (libm::log(T_MIN), libm::log(T_MAX));
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > LN_T_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d)?;
        }
    }
    let t = libm::exp((a + b) / 2.0);
    if nll_at(z, y, t)? > nll_at(z, y, 1.0)? {
        return Ok(1.0);
    }
    Ok(t)
}

/// Row-wise `softmax(z / t)`.
pub fn apply_temperature(z: &Matrix, t: f64) -> Result<Matrix> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("temperature must be positive, got {t}")));
    }
    let mut p = z.map(|v| v / t);
    for i in 0..p.rows() {
        softmax_in_place(p.row_mut(i));
    }
    Ok(p)
}

/// Clip each probability to `[1e-6, 1 - 1e-6]` and renormalize the row.
pub fn clip_renormalize(p: &Matrix) -> Matrix {
    let mut out = p.map(|v| v.clamp(PROB_CLIP, 1.0 - PROB_CLIP));
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

fn top_label(row: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    (best, row[best])
}

fn bin_of(conf: f64, bins: usize) -> usize {
    ((conf * bins as f64) as usize).min(bins - 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub confidence: f64,
    pub accuracy: f64,
    pub cp_lo: f64,
    pub cp_hi: f64,
}

/// Non-empty equal-width bins of top-label confidence with 95% Clopper-Pearson
/// intervals on accuracy.
pub fn reliability(p: &Matrix, y: &[usize], bins: usize) -> Vec<ReliabilityBin> {
    let mut count = vec![0usize; bins];
    let mut correct = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    for (row, &t) in p.rows_iter().zip(y) {
        let (pred, conf) = top_label(row);
        let b = bin_of(conf, bins);
        count[b] += 1;
        conf_sum[b] += conf;
        if pred == t {
            correct[b] += 1;
        }
    }
    (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let (cp_lo, cp_hi) = clopper_pearson(correct[b], count[b], 0.05);
            ReliabilityBin {
                lo: b as f64 / bins as f64,
                hi: (b + 1) as f64 / bins as f64,
                count: count[b],
                confidence: conf_sum[b] / count[b] as f64,
                accuracy: correct[b] as f64 / count[b] as f64,
                cp_lo,
                cp_hi,
            }
        })
        .collect()
}

/// Expected calibration error of the top label.
pub fn ece(p: &Matrix, y: &[usize], bins: usize) -> f64 {
    let n = y.len() as f64;
    reliability(p, y, bins).iter().map(|b| b.count as f64 / n * (b.accuracy - b.confidence).abs()).sum()
}

/// `mean_i sum_c (p_ic - [y_i = c])^2`, without a `1/K` factor.
pub fn brier(p: &Matrix, y: &[usize]) -> f64 {
    let total: f64 = p
        .rows_iter()
        .zip(y)
        .map(|(row, &t)| row.iter().enumerate().map(|(c, &v)| if c == t { (v - 1.0) * (v - 1.0) } else { v * v }).sum::<f64>())
        .sum();
    total / y.len() as f64
}

/// Mean `-ln p_{i, y_i}` with the true-class probability clipped.
pub fn log_loss(p: &Matrix, y: &[usize]) -> f64 {
    let total: f64 = p.rows_iter().zip(y).map(|(row, &t)| -libm::log(row[t].clamp(PROB_CLIP, 1.0 - PROB_CLIP))).sum();
    total / y.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbabilityScores {
    pub log_loss: f64,
    pub brier: f64,
    pub ece: f64,
}

impl ProbabilityScores {
    pub fn of(p: &Matrix, y: &[usize]) -> Self {
        let p = clip_renormalize(p);
        Self { log_loss: log_loss(&p, y), brier: brier(&p, y), ece: ece(&p, y, N_BINS) }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationReport {
    pub temperature: f64,
    pub val_nll_before: f64,
    pub val_nll_after: f64,
    pub before: ProbabilityScores,
    pub after: ProbabilityScores,
    pub bins_before: Vec<ReliabilityBin>,
    pub bins_after: Vec<ReliabilityBin>,
}

/// Fit `T` on validation logits, then score `eval` logits before and after.
pub fn calibrate(z_val: &Matrix, y_val: &[usize], z_eval: &Matrix, y_eval: &[usize]) -> Result<CalibrationReport> {
    let temperature = fit_temperature(z_val, y_val)?;
    let before_p = clip_renormalize(&apply_temperature(z_eval, 1.0)?);
    let after_p = clip_renormalize(&apply_temperature(z_eval, temperature)?);
    Ok(CalibrationReport {
        temperature,
        val_nll_before: nll_at(z_val, y_val, 1.0)?,
        val_nll_after: nll_at(z_val, y_val, temperature)?,
        before: ProbabilityScores::of(&before_p, y_eval),
        after: ProbabilityScores::of(&after_p, y_eval),
        bins_before: reliability(&before_p, y_eval, N_BINS),
        bins_after: reliability(&after_p, y_eval, N_BINS),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_softmax_at_unit_temperature() {
        let z = Matrix::from_rows(&[vec![2.0, 0.0]]).unwrap();
        let p = apply_temperature(&z, 1.0).unwrap();
        let e = libm::exp(2.0);
        assert!((p.get(0, 0) - e / (e + 1.0)).abs() < 1e-15);
        let p = apply_temperature(&z, 1e9).unwrap();
        assert!((p.get(0, 0) - 0.5).abs() < 1e-8);
        assert!(apply_temperature(&z, 0.0).is_err());
    }

    #[test]
    fn degenerate_logits_give_unit_temperature() {
        let z = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(fit_temperature(&z, &[0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn confident_half_right_has_ece_one_half() {
        let p = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!((ece(&p, &[0, 1], 20) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_two_class_scores() {
        let p = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((brier(&p, &[0, 1]) - 0.5).abs() < 1e-15);
        assert!((log_loss(&p, &[0, 1]) - libm::log(2.0)).abs() < 1e-15);
        let one_hot = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(brier(&one_hot, &[0]), 0.0);
        assert!(log_loss(&one_hot, &[0]) < 2e-6);
    }

    #[test]
    fn empty_bins_are_omitted() {
        let p = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let bins = reliability(&p, &[0, 0], 20);
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].count + bins[1].count, 2);
    }
}
