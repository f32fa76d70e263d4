use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::expr::{OpCounts, Program};

/// `(dim, number of logits using it)`, most used first, ties by dim.
pub fn usage_histogram(logits: &[Program]) -> Vec<(u32, usize)> {
    let mut freq: BTreeMap<u32, usize> = BTreeMap::new();
    for p in logits {
        for j in p.used_dims() {
            *freq.entry(j).or_default() += 1;
        }
    }
    let mut out: Vec<(u32, usize)> = freq.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// For each observed set of logits sharing a coordinate, the number of
/// coordinates used by exactly that set. Largest groups first.
pub fn overlap_sets(logits: &[Program]) -> Vec<(Vec<usize>, usize)> {
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, p) in logits.iter().enumerate() {
        for j in p.used_dims() {
            members.entry(j).or_default().push(i);
        }
    }
    let mut patterns: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for set in members.into_values() {
        *patterns.entry(set).or_default() += 1;
    }
    let mut out: Vec<(Vec<usize>, usize)> = patterns.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Sparsity and size figures over a set of logits, counted on the trees as given.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SparsitySummary {
    pub logits: usize,
    pub unique_dims: usize,
    pub median_dims_per_logit: f64,
    pub median_nodes: f64,
    pub max_depth: usize,
    pub total_nodes: usize,
    pub op_counts: OpCounts,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

impl SparsitySummary {
    pub fn of(logits: &[Program]) -> Self {
        let mut all = BTreeSet::new();
        let mut op_counts = OpCounts::default();
        let mut dims = Vec::new();
        let mut nodes = Vec::new();
        let mut max_depth = 0;
        for p in logits {
            let s = p.stats();
            all.extend(s.used_dims.iter().copied());
            op_counts += s.op_counts;
            dims.push(s.used_dims.len() as f64);
            nodes.push(s.node_count as f64);
            max_depth = max_depth.max(s.depth);
        }
        Self {
            logits: logits.len(),
            unique_dims: all.len(),
            median_dims_per_logit: median(dims),
            total_nodes: nodes.iter().sum::<f64>() as usize,
            median_nodes: median(nodes),
            max_depth,
            op_counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_logits_give_singleton_patterns() {
        let logits = [Program::parse("plus(d0, d1)").unwrap(), Program::parse("times(d2, d3)").unwrap()];
        let sets = overlap_sets(&logits);
        assert_eq!(sets, [(alloc::vec![0], 2), (alloc::vec![1], 2)]);
        assert!(usage_histogram(&logits).iter().all(|&(_, f)| f == 1));
    }

    #[test]
    fn shared_dim_ranks_first() {
        let logits = [Program::parse("plus(d5, d1)").unwrap(), Program::parse("times(d5, d3)").unwrap()];
        assert_eq!(usage_histogram(&logits)[0], (5, 2));
        assert!(overlap_sets(&logits).contains(&(alloc::vec![0, 1], 1)));
    }
}
