//! Greedy relevance/redundancy partitioning of embedding coordinates into
//! disjoint, exhaustive views, fitted on training rows only.
//!
//! Relevance is the one-way ANOVA F statistic of a coordinate grouped by
//! class; redundancy is the mean absolute Pearson correlation with the
//! coordinates already in the view. Candidates are ranked by
//! `relevance - redundancy * scale`, where `scale` is the mean relevance of
//! the pool when the view starts, so both terms live on the F scale.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::digest::fnv1a64;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Cap for the F statistic of perfectly separating coordinates.
pub const F_MAX: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SpfpConfig {
    /// Explicit per-view budget; `None` means `ceil(budget_fraction * d)`.
    pub budget: Option<usize>,
    pub budget_fraction: f64,
    /// Kept for provenance; every finalized view leaves the pool entirely.
    pub removal_fraction: f64,
    /// Coverage threshold of the information-preservation proxy.
    pub theta: f64,
}

impl Default for SpfpConfig {
    fn default() -> Self {
        Self { budget: None, budget_fraction: 0.1, removal_fraction: 0.2, theta: 0.9 }
    }
}

impl SpfpConfig {
    pub fn with_budget(budget: usize) -> Self {
        Self { budget: Some(budget), ..Self::default() }
    }

    pub fn budget_for(&self, d: usize) -> usize {
        self.budget.unwrap_or_else(|| libm::ceil(self.budget_fraction * d as f64 - 1e-9) as usize).max(1)
    }
}

/// Disjoint, exhaustive coordinate views.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ViewPartition {
    /// Each view's coordinates in ascending order.
    pub views: Vec<Vec<usize>>,
    pub d: usize,
    pub budget: usize,
    pub removal_fraction: f64,
    /// Share of the remaining pool's relevance captured by each view.
    pub coverage: Vec<f64>,
    /// Whether each view met the `theta` coverage proxy.
    pub preserved: Vec<bool>,
}

impl ViewPartition {
    /// A partition built from explicit views (checked for validity).
    pub fn from_views(views: Vec<Vec<usize>>, d: usize) -> Result<Self> {
        let budget = views.iter().map(Vec::len).max().unwrap_or(0);
        let n = views.len();
        let mut views = views;
        views.iter_mut().for_each(|v| v.sort_unstable());
        let p = Self { views, d, budget, removal_fraction: 0.0, coverage: vec![0.0; n], preserved: vec![false; n] };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn view_set(&self, v: usize) -> BTreeSet<u32> {
        self.views[v].iter().map(|&j| j as u32).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.views.iter().map(Vec::len).collect()
    }

    /// Views are non-empty, pairwise disjoint and cover `0..d`.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.d];
        for (v, view) in self.views.iter().enumerate() {
            if view.is_empty() {
                return Err(Error::InvalidArgument(alloc::format!("view {v} is empty")));
            }
            for &j in view {
                if j >= self.d {
                    return Err(Error::InvalidArgument(alloc::format!("view {v} has coordinate {j} >= d = {}", self.d)));
                }
                if seen[j] {
                    return Err(Error::InvalidArgument(alloc::format!("coordinate {j} appears in more than one view")));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(alloc::format!("coordinate {j} is in no view")));
        }
        Ok(())
    }

    /// Canonical text used for the digest: `d=<d>;<v0 coords>|<v1 coords>|...`.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "d={};", self.d);
        for (v, view) in self.views.iter().enumerate() {
            if v > 0 {
                s.push('|');
            }
            for (k, j) in view.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{j}");
            }
        }
        s
    }

    pub fn digest(&self) -> u64 {
        fnv1a64(self.canonical_text().as_bytes())
    }
}

/// One-way ANOVA F statistic of `values` grouped by `labels`.
///
/// Zero-variance inputs score 0; perfectly separating inputs score [`F_MAX`].
pub fn relevance(values: &[f64], labels: &[usize], classes: usize) -> f64 {
    let n = values.len();
    let mut sum = vec![0.0; classes];
    let mut count = vec![0usize; classes];
    for (&v, &c) in values.iter().zip(labels) {
        sum[c] += v;
        count[c] += 1;
    }
    let groups = count.iter().filter(|&&c| c > 0).count();
    if groups < 2 || n <= groups {
        return 0.0;
    }
    let grand = values.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let ss_between: f64 = means.iter().zip(&count).map(|(m, &c)| c as f64 * (m - grand) * (m - grand)).sum();
    let ss_within: f64 = values.iter().zip(labels).map(|(v, &c)| (v - means[c]) * (v - means[c])).sum();
    let scale = values.iter().map(|v| (v - grand) * (v - grand)).sum::<f64>();
    if scale <= 0.0 || ss_between <= 1e-12 * scale {
        return 0.0;
    }
    if ss_within <= 1e-12 * scale {
        return F_MAX;
    }
    let f = (ss_between / (groups - 1) as f64) / (ss_within / (n - groups) as f64);
    f.min(F_MAX)
}

/// Absolute Pearson correlation; 0 when either side has zero variance.
pub fn abs_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / libm::sqrt(saa * sbb)).abs().min(1.0)
}

/// Training columns with cached relevance scores.
pub struct Scorer {
    columns: Vec<Vec<f64>>,
    relevance: Vec<f64>,
}

impl Scorer {
    pub fn new(x_train: &Matrix, labels: &[usize], classes: usize) -> Result<Self> {
        if labels.len() != x_train.rows() {
            return Err(Error::Shape { expected: x_train.rows(), found: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= classes) {
            return Err(Error::LabelOutOfRange { label: bad as u32, classes: classes as u32 });
        }
        let columns: Vec<Vec<f64>> = (0..x_train.cols()).map(|j| x_train.column(j)).collect();
        let relevance = columns.iter().map(|c| relevance(c, labels, classes)).collect();
        Ok(Self { columns, relevance })
    }

    pub fn relevance(&self, j: usize) -> f64 {
        self.relevance[j]
    }

    /// Mean absolute correlation of `j` with the members of `view` (0 if empty).
    pub fn redundancy(&self, j: usize, view: &[usize]) -> f64 {
        if view.is_empty() {
            return 0.0;
        }
        view.iter().map(|&v| abs_correlation(&self.columns[j], &self.columns[v])).sum::<f64>() / view.len() as f64
    }

    /// Mean relevance over `pool`, the redundancy weight for a view grown from it.
    pub fn scale(&self, pool: &[usize]) -> f64 {
        if pool.is_empty() {
            return 0.0;
        }
        pool.iter().map(|&j| self.relevance[j]).sum::<f64>() / pool.len() as f64
    }

    /// Greedy growth of one view from `pool` up to `budget` members.
    ///
    /// Returned in selection order.
    pub fn grow_view(&self, pool: &[usize], budget: usize) -> Result<Vec<usize>> {
        if pool.is_empty() {
            return Err(Error::InvalidArgument("cannot grow a view from an empty pool".into()));
        }
        let target = budget.min(pool.len());
        let scale = self.scale(pool);
        let mut candidates: Vec<usize> = pool.to_vec();
        candidates.sort_unstable();
        let mut red_sum = vec![0.0; candidates.len()];
        let mut taken = vec![false; candidates.len()];
        let mut view = Vec::with_capacity(target);
        while view.len() < target {
            let mut best: Option<(usize, f64)> = None;
            for (k, &j) in candidates.iter().enumerate() {
                if taken[k] {
                    continue;
                }
                let red = if view.is_empty() { 0.0 } else { red_sum[k] / view.len() as f64 };
                let score = self.relevance[j] - red * scale;
                // candidates are ascending, so strict > keeps the smallest index on ties
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((k, score));
                }
            }
            let (k, _) = best.expect("target never exceeds the pool size");
            taken[k] = true;
            let chosen = candidates[k];
            view.push(chosen);
            for (m, &j) in candidates.iter().enumerate() {
                if !taken[m] {
                    red_sum[m] += abs_correlation(&self.columns[j], &self.columns[chosen]);
                }
            }
        }
        Ok(view)
    }
}

/// Partition all coordinates of `x_train` into views.
pub fn partition(x_train: &Matrix, labels: &[usize], classes: usize, config: &SpfpConfig) -> Result<ViewPartition> {
    let d = x_train.cols();
    if d == 0 {
        return Err(Error::InvalidArgument("cannot partition zero coordinates".into()));
    }
    let scorer = Scorer::new(x_train, labels, classes)?;
    let budget = config.budget_for(d);
    let mut pool: Vec<usize> = (0..d).collect();
    let mut views = Vec::new();
    let mut coverage = Vec::new();
    let mut preserved = Vec::new();
    while !pool.is_empty() {
        let view = scorer.grow_view(&pool, budget)?;
        let pool_rel: f64 = pool.iter().map(|&j| scorer.relevance(j)).sum();
        let view_rel: f64 = view.iter().map(|&j| scorer.relevance(j)).sum();
        let cov = if pool_rel > 0.0 { view_rel / pool_rel } else { 1.0 };
        coverage.push(cov);
        preserved.push(cov >= config.theta);
        let chosen: BTreeSet<usize> = view.iter().copied().collect();
        pool.retain(|j| !chosen.contains(j));
        views.push(chosen.into_iter().collect());
    }
    let p = ViewPartition { views, d, budget, removal_fraction: config.removal_fraction, coverage, preserved };
    debug_assert!(p.validate().is_ok());
    Ok(p)
}
