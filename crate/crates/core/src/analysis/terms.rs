use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{BinOp, Expr, Program};
use crate::matrix::Matrix;
use crate::Result;

/// A signed summand of a logit: the logit equals `sum_k sign_k * term_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveTerm {
    pub term: Expr,
    /// `+1.0` or `-1.0`.
    pub sign: f64,
    pub dims: BTreeSet<u32>,
}

/// Flatten top-level additions and subtractions. Products and quotients are
/// kept whole.
pub fn additive_terms(logit: &Program) -> Vec<AdditiveTerm> {
    fn go(e: &Expr, sign: f64, out: &mut Vec<AdditiveTerm>) {
        match e {
            Expr::Bin(BinOp::Add, a, b) => {
                go(a, sign, out);
                go(b, sign, out);
            }
            Expr::Bin(BinOp::Sub, a, b) => {
                go(a, sign, out);
                go(b, -sign, out);
            }
            _ => {
                let mut dims = BTreeSet::new();
                e.collect_dims(&mut dims);
                out.push(AdditiveTerm { term: e.clone(), sign, dims });
            }
        }
    }
    let mut out = Vec::new();
    go(logit.root(), 1.0, &mut out);
    out
}

/// Syntactic polynomial degree of coordinate `j`: products add degrees,
/// sums take the larger, quotients count their numerator only.
pub fn max_power(e: &Expr, j: u32) -> usize {
    match e {
        Expr::Dim(k) => usize::from(*k == j),
        Expr::Const(_) => 0,
        Expr::Bin(BinOp::Mul, a, b) => max_power(a, j) + max_power(b, j),
        Expr::Bin(BinOp::Div, a, _) => max_power(a, j),
        Expr::Bin(_, a, b) => max_power(a, j).max(max_power(b, j)),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Importance {
    pub dim: u32,
    /// Mean over rows of the summed absolute contributions of terms using `dim`.
    pub score: f64,
    /// Percentage of logits that use `dim`.
    pub pct_logits: f64,
    /// Largest [`max_power`] over logits.
    pub max_power: usize,
}

/// Mean absolute term contribution for every coordinate of `x`, with terms
/// pooled over all logits.
pub fn importance(logits: &[Program], x: &Matrix, epsilon: f64) -> Result<Vec<Importance>> {
    let d = x.cols();
    let mut score = vec![0.0; d];
    let mut uses = vec![0usize; d];
    let mut power = vec![0usize; d];
    for logit in logits {
        logit.check_width(d)?;
        for j in logit.used_dims() {
            uses[j as usize] += 1;
            power[j as usize] = power[j as usize].max(max_power(logit.root(), j));
        }
        for t in additive_terms(logit) {
            if t.dims.is_empty() {
                continue;
            }
            let total: f64 = x.rows_iter().map(|row| libm::fabs(t.term.eval_raw(row, epsilon))).sum();
            for &j in &t.dims {
                score[j as usize] += total;
            }
        }
    }
    let n = x.rows().max(1) as f64;
    let n_logits = logits.len().max(1) as f64;
    Ok((0..d)
        .map(|j| Importance {
            dim: j as u32,
            score: score[j] / n,
            pct_logits: 100.0 * uses[j] as f64 / n_logits,
            max_power: power[j],
        })
        .collect())
}
