//! Gradient descent on the constant leaves of a team against batch
//! cross-entropy, with reverse-mode derivatives through each tree.

use alloc::vec;
use alloc::vec::Vec;

use super::fitness::{softmax_ce, softmax_in_place, team_logits, PROB_CLIP};
use crate::expr::{BinOp, Expr, Program};
use crate::matrix::Matrix;
use crate::Result;

/// All constants of a team in (view, class, pre-order) order.
pub fn constants(team: &[Vec<Program>]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in team.iter().flatten() {
        g.root().visit(&mut |e| {
            if let Expr::Const(c) = e {
                out.push(*c);
            }
        });
    }
    out
}

/// Write constants back in the order produced by [`constants`].
pub fn set_constants(team: &mut [Vec<Program>], values: &[f64]) {
    let mut it = values.iter();
    for g in team.iter_mut().flatten() {
        g.root_mut().constants_mut(&mut |c| {
            if let Some(v) = it.next() {
                *c = *v;
            }
        });
    }
}

/// Forward values in pre-order, each with the index of its right child.
fn forward(e: &Expr, row: &[f64], epsilon: f64, tape: &mut Vec<(f64, usize)>) -> f64 {
    let me = tape.len();
    tape.push((0.0, 0));
    let v = match e {
        Expr::Bin(op, a, b) => {
            let va = forward(a, row, epsilon, tape);
            tape[me].1 = tape.len();
            let vb = forward(b, row, epsilon, tape);
            op.apply(va, vb, epsilon)
        }
        Expr::Dim(j) => row[*j as usize],
        Expr::Const(c) => *c,
    };
    tape[me].0 = v;
    v
}

/// Accumulate `adjoint * d(node)/d(const)` into `grads`, constants numbered
/// in pre-order starting at `*next`.
fn backward(e: &Expr, at: usize, adjoint: f64, tape: &[(f64, usize)], epsilon: f64, grads: &mut [f64], next: &mut usize) {
    match e {
        Expr::Bin(op, a, b) => {
            let ia = at + 1;
            let ib = tape[at].1;
            let (va, vb) = (tape[ia].0, tape[ib].0);
            let (da, db) = match op {
                BinOp::Add => (adjoint, adjoint),
                BinOp::Sub => (adjoint, -adjoint),
                BinOp::Mul => (adjoint * vb, adjoint * va),
                BinOp::Div => {
                    if vb.abs() >= epsilon {
                        (adjoint / vb, -adjoint * va / (vb * vb))
                    } else {
                        // protected branch: the denominator is the constant +-epsilon
                        let den = if vb >= 0.0 { epsilon } else { -epsilon };
                        (adjoint / den, 0.0)
                    }
                }
            };
            backward(a, ia, da, tape, epsilon, grads, next);
            backward(b, ib, db, tape, epsilon, grads, next);
        }
        Expr::Const(_) => {
            grads[*next] += adjoint;
            *next += 1;
        }
        Expr::Dim(_) => {}
    }
}

/// Batch cross-entropy and its gradient with respect to [`constants`].
///
/// Rows whose true-class probability sits in the clipped region contribute no
/// gradient, matching the flat clipped loss.
pub fn ce_and_gradient(team: &[Vec<Program>], x: &Matrix, rows: &[usize], labels: &[usize], epsilon: f64) -> Result<(f64, Vec<f64>)> {
    let z = team_logits(team, x, rows, epsilon)?;
    let ce = softmax_ce(&z, labels)?;
    let classes = z.cols();
    let n_const = constants(team).len();
    let mut grads = vec![0.0; n_const];
    if n_const == 0 {
        return Ok((ce, grads));
    }
    let inv_n = 1.0 / rows.len() as f64;
    let mut p = vec![0.0; classes];
    let mut tape = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        p.copy_from_slice(z.row(i));
        softmax_in_place(&mut p);
        let y = labels[i];
        if !(PROB_CLIP..=1.0 - PROB_CLIP).contains(&p[y]) {
            continue;
        }
        let row = x.row(r);
        let mut next = 0;
        for genes in team {
            for (c, gene) in genes.iter().enumerate() {
                let adjoint = (p[c] - if c == y { 1.0 } else { 0.0 }) * inv_n;
                tape.clear();
                forward(gene.root(), row, epsilon, &mut tape);
                backward(gene.root(), 0, adjoint, &tape, epsilon, &mut grads, &mut next);
            }
        }
    }
    Ok((ce, grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOutcome {
    pub ce_before: f64,
    pub ce_after: f64,
    /// Steps that moved the constants.
    pub accepted_steps: usize,
}

/// Up to `steps` gradient steps with backtracking: a step that raises the
/// batch CE is retried with the rate halved, at most three times, and
/// dropped if it still does not help. Batch CE never increases.
pub fn tune_constants(
    team: &mut [Vec<Program>],
    x: &Matrix,
    rows: &[usize],
    labels: &[usize],
    learning_rate: f64,
    steps: usize,
    epsilon: f64,
) -> Result<TuneOutcome> {
    let mut current = constants(team);
    let (mut ce, _) = ce_and_gradient(team, x, rows, labels, epsilon)?;
    let ce_before = ce;
    let mut accepted_steps = 0;
    if current.is_empty() {
        return Ok(TuneOutcome { ce_before, ce_after: ce, accepted_steps });
    }
    for _ in 0..steps {
        let (_, grad) = ce_and_gradient(team, x, rows, labels, epsilon)?;
        let mut rate = learning_rate;
        let mut moved = false;
        for _ in 0..4 {
            let trial: Vec<f64> = current.iter().zip(&grad).map(|(c, g)| c - rate * g).collect();
            set_constants(team, &trial);
            let trial_ce = softmax_ce(&team_logits(team, x, rows, epsilon)?, labels)?;
            if trial_ce <= ce {
                current = trial;
                ce = trial_ce;
                moved = true;
                break;
            }
            rate *= 0.5;
        }
        if !moved {
            set_constants(team, &current);
            break;
        }
        accepted_steps += 1;
    }
    Ok(TuneOutcome { ce_before, ce_after: ce, accepted_steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_for_true_class_increases() {
        let mut team = vec![vec![Program::constant(0.5), Program::constant(0.0)]];
        let x = Matrix::zeros(1, 1);
        let (_, g) = ce_and_gradient(&team, &x, &[0], &[0], 1e-6).unwrap();
        assert!(g[0] < 0.0);
        let out = tune_constants(&mut team, &x, &[0], &[0], 0.1, 3, 1e-6).unwrap();
        assert!(out.ce_after < out.ce_before);
        assert!(constants(&team)[0] > 0.5);
    }

    #[test]
    fn constant_free_team_is_untouched() {
        let mut team = vec![vec![Program::dim(0), Program::dim(1)]];
        let before = team.clone();
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let out = tune_constants(&mut team, &x, &[0], &[1], 0.1, 5, 1e-6).unwrap();
        assert_eq!(team, before);
        assert_eq!(out.accepted_steps, 0);
    }

    #[test]
    fn set_constants_round_trips() {
        let mut team = vec![vec![Program::parse("plus([1.0], times(d0, [2.0]))").unwrap(), Program::constant(3.0)]];
        assert_eq!(constants(&team), [1.0, 2.0, 3.0]);
        set_constants(&mut team, &[4.0, 5.0, 6.0]);
        assert_eq!(team[0][0].serialize(), "plus([4.0], times(d0, [5.0]))");
        assert_eq!(constants(&team), [4.0, 5.0, 6.0]);
    }
}
