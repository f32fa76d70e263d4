use alloc::vec;

use crate::expr::Program;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` inside log-losses.
pub const PROB_CLIP: f64 = 1e-6;

/// Max-shifted softmax of one logit row, written in place.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Mean negative log-likelihood of `labels` under `softmax(z)` with clipping.
pub fn softmax_ce(z: &Matrix, labels: &[usize]) -> Result<f64> {
    let k = z.cols();
    if k < 2 {
        return Err(Error::InvalidArgument("cross-entropy needs at least two classes".into()));
    }
    if labels.len() != z.rows() {
        return Err(Error::Shape { expected: z.rows(), found: labels.len() });
    }
    if z.rows() == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut row = vec![0.0; k];
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::LabelOutOfRange { label: y as u32, classes: k as u32 });
        }
        row.copy_from_slice(z.row(i));
        softmax_in_place(&mut row);
        total -= libm::log(row[y].clamp(PROB_CLIP, 1.0 - PROB_CLIP));
    }
    Ok(total / labels.len() as f64)
}

/// Logits `z[i][c] = sum_v gene_{v,c}(x[rows[i]])`, summed in ascending view order.
pub fn team_logits<G: AsRef<[Program]>>(team: &[G], x: &Matrix, rows: &[usize], epsilon: f64) -> Result<Matrix> {
    let classes = team.first().map_or(0, |g| g.as_ref().len());
    for genes in team {
        let genes = genes.as_ref();
        if genes.len() != classes {
            return Err(Error::Shape { expected: classes, found: genes.len() });
        }
        for g in genes {
            g.check_width(x.cols())?;
        }
    }
    let mut z = Matrix::zeros(rows.len(), classes);
    for genes in team {
        for (c, gene) in genes.as_ref().iter().enumerate() {
            for (i, &r) in rows.iter().enumerate() {
                let v = z.get(i, c) + gene.root().eval_raw(x.row(r), epsilon);
                z.set(i, c, v);
            }
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn uniform_logits_give_ln2() {
        let z = Matrix::zeros(4, 2);
        let ce = softmax_ce(&z, &[0, 1, 1, 0]).unwrap();
        assert!((ce - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_hits_clip_floor() {
        let z = Matrix::from_rows(&[alloc::vec![100.0, 0.0]]).unwrap();
        let ce = softmax_ce(&z, &[0]).unwrap();
        assert!((ce - -libm::log(1.0 - 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn label_out_of_range() {
        let z = Matrix::zeros(1, 3);
        assert_eq!(softmax_ce(&z, &[3]), Err(Error::LabelOutOfRange { label: 3, classes: 3 }));
        assert!(softmax_ce(&Matrix::zeros(1, 1), &[0]).is_err());
    }

    #[test]
    fn two_constant_views_add() {
        let team = [alloc::vec![Program::constant(1.0), Program::constant(0.0)], alloc::vec![Program::constant(2.0), Program::constant(0.0)]];
        let x = Matrix::zeros(3, 1);
        let z = team_logits(&team, &x, &[0, 1, 2], 1e-6).unwrap();
        assert!((0..3).all(|i| z.get(i, 0) == 3.0));
    }

    #[test]
    fn mismatched_gene_counts() {
        let team = [alloc::vec![Program::constant(1.0)], alloc::vec![Program::constant(2.0), Program::constant(0.0)]];
        assert!(team_logits(&team, &Matrix::zeros(1, 1), &[0], 1e-6).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut z: Vec<f64> = alloc::vec![1000.0, -3.0, 7.5, 999.0];
        softmax_in_place(&mut z);
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
