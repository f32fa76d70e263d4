use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::fitness::{softmax_in_place, team_logits};
use crate::digest::fnv1a64;
use crate::expr::{BinOp, Expr, Program};
use crate::matrix::Matrix;
use crate::spfp::ViewPartition;
use crate::{Error, Result};

/// One member of a view's population: a logit program per class.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genes: Vec<Program>,
    pub view: usize,
    /// Lower is better; `+inf` until evaluated.
    pub fitness: f64,
    /// Whether the last evaluation was inside a team.
    pub team_mode: bool,
}

impl Individual {
    pub fn new(genes: Vec<Program>, view: usize) -> Self {
        Self { genes, view, fitness: f64::INFINITY, team_mode: false }
    }

    pub fn node_count(&self) -> usize {
        self.genes.iter().map(Program::node_count).sum()
    }
}

/// The additive classifier: `team[v][c]` is class `c`'s program on view `v`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurrogateModel {
    pub partition: ViewPartition,
    pub classes: usize,
    pub team: Vec<Vec<Program>>,
    pub epsilon: f64,
}

impl SurrogateModel {
    pub fn new(partition: ViewPartition, team: Vec<Vec<Program>>, epsilon: f64) -> Result<Self> {
        let classes = team.first().map_or(0, Vec::len);
        let model = Self { partition, classes, team, epsilon };
        model.validate()?;
        Ok(model)
    }

    /// Gene counts match, one individual per view, and programs stay inside their views.
    pub fn validate(&self) -> Result<()> {
        if self.team.len() != self.partition.len() {
            return Err(Error::Shape { expected: self.partition.len(), found: self.team.len() });
        }
        for (v, genes) in self.team.iter().enumerate() {
            if genes.len() != self.classes {
                return Err(Error::Shape { expected: self.classes, found: genes.len() });
            }
            let view = self.partition.view_set(v);
            if let Some(g) = genes.iter().find(|g| !g.uses_only(&view)) {
                return Err(Error::InvalidArgument(alloc::format!("program {g} leaves view {v}")));
            }
        }
        Ok(())
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        let rows: Vec<usize> = (0..x.rows()).collect();
        self.logits_rows(x, &rows)
    }

    pub fn logits_rows(&self, x: &Matrix, rows: &[usize]) -> Result<Matrix> {
        team_logits(&self.team, x, rows, self.epsilon)
    }

    /// Softmax of `logits / temperature`.
    pub fn probabilities(&self, x: &Matrix, temperature: f64) -> Result<Matrix> {
        let mut z = self.logits(x)?;
        for i in 0..z.rows() {
            let row = z.row_mut(i);
            row.iter_mut().for_each(|v| *v /= temperature);
            softmax_in_place(row);
        }
        Ok(z)
    }

    /// Per-class logit programs with the views summed left to right.
    pub fn class_logits(&self) -> Vec<Program> {
        (0..self.classes)
            .map(|c| {
                let mut parts = self.team.iter().map(|genes| genes[c].root().clone());
                let first = parts.next().unwrap_or(Expr::Const(0.0));
                Program::new(parts.fold(first, |acc, e| Expr::bin(BinOp::Add, acc, e)))
            })
            .collect()
    }

    /// Total node count across all programs.
    pub fn complexity(&self) -> usize {
        self.team.iter().flatten().map(Program::node_count).sum()
    }

    pub fn depth(&self) -> usize {
        self.team.iter().flatten().map(Program::depth).max().unwrap_or(0)
    }

    pub fn used_dims(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for g in self.team.iter().flatten() {
            g.root().collect_dims(&mut out);
        }
        out
    }

    /// Serialized programs in (class, view) order, one per line.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        for c in 0..self.classes {
            for genes in &self.team {
                s.push_str(&genes[c].serialize());
                s.push('\n');
            }
        }
        s
    }

    pub fn digest(&self) -> u64 {
        fnv1a64(self.canonical_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn model() -> SurrogateModel {
        let part = ViewPartition::from_views(vec![vec![0], vec![1]], 2).unwrap();
        let team = vec![
            vec![Program::parse("d0").unwrap(), Program::constant(0.5)],
            vec![Program::parse("times(d1, [2.0])").unwrap(), Program::parse("d1").unwrap()],
        ];
        SurrogateModel::new(part, team, 1e-6).unwrap()
    }

    #[test]
    fn assembled_logits_match_team_sum() {
        let m = model();
        let x = Matrix::from_rows(&[vec![1.0, 3.0], vec![-2.0, 0.5]]).unwrap();
        let z = m.logits(&x).unwrap();
        let logits = m.class_logits();
        assert_eq!(logits[0].serialize(), "plus(d0, times(d1, [2.0]))");
        for i in 0..2 {
            for c in 0..2 {
                assert_eq!(z.get(i, c), logits[c].eval(x.row(i), 1e-6).unwrap());
            }
        }
        let p = m.probabilities(&x, 1.0).unwrap();
        assert!((p.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn structural_measures() {
        let m = model();
        assert_eq!(m.complexity(), 1 + 1 + 3 + 1);
        assert_eq!(m.depth(), 1);
        assert_eq!(m.used_dims().len(), 2);
        assert_eq!(m.canonical_text(), "d0\ntimes(d1, [2.0])\n[0.5]\nd1\n");
    }

    #[test]
    fn rejects_programs_outside_their_view() {
        let part = ViewPartition::from_views(vec![vec![0], vec![1]], 2).unwrap();
        let team = vec![vec![Program::dim(1)], vec![Program::dim(1)]];
        assert!(SurrogateModel::new(part, team, 1e-6).is_err());
    }
}
