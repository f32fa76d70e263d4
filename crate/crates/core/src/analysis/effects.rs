use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::Program;
use crate::gp::softmax_in_place;
use crate::matrix::Matrix;
use crate::metrics::midranks;
use crate::{Error, Result};

pub const GRID_KNOTS: usize = 20;

/// Class logits with a fitted temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedModel {
    pub logits: Vec<Program>,
    pub temperature: f64,
    pub epsilon: f64,
}

impl CalibratedModel {
    pub fn new(logits: Vec<Program>, temperature: f64, epsilon: f64) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::InvalidArgument("need at least two class logits".into()));
        }
        if !(temperature > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self { logits, temperature, epsilon })
    }

    pub fn check_width(&self, d: usize) -> Result<()> {
        self.logits.iter().try_for_each(|p| p.check_width(d))
    }

    /// Calibrated probability of `class` at `row`.
    pub fn probability(&self, row: &[f64], class: usize) -> f64 {
        let mut z: Vec<f64> = self.logits.iter().map(|p| p.root().eval_raw(row, self.epsilon) / self.temperature).collect();
        softmax_in_place(&mut z);
        z[class]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EffectKind {
    Pdp,
    Ale,
}

impl EffectKind {
    pub fn name(self) -> &'static str {
        match self {
            EffectKind::Pdp => "pdp",
            EffectKind::Ale => "ale",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EffectCurve {
    pub kind: EffectKind,
    pub dim: u32,
    pub class: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
}

impl EffectCurve {
    /// `max - min` of the point curve.
    pub fn range(&self) -> f64 {
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        if self.values.is_empty() { 0.0 } else { max - min }
    }

    /// Trapezoid integral of `|value|` over the grid.
    pub fn abs_integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(g, v)| (g[1] - g[0]) * (libm::fabs(v[0]) + libm::fabs(v[1])) / 2.0)
            .sum()
    }
}

/// Linear-interpolation (type 7) quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `knots` empirical quantiles at levels `k / (knots - 1)`.
pub fn quantile_grid(values: &[f64], knots: usize) -> Vec<f64> {
    if values.is_empty() || knots == 0 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if knots == 1 {
        return vec![quantile_sorted(&sorted, 0.5)];
    }
    (0..knots).map(|k| quantile_sorted(&sorted, k as f64 / (knots - 1) as f64)).collect()
}

/// Percentile interval per column of bootstrap replicates.
fn percentile_band(replicates: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![0.0; width];
    let mut hi = vec![0.0; width];
    let mut col = Vec::with_capacity(replicates.len());
    for k in 0..width {
        col.clear();
        col.extend(replicates.iter().map(|r| r[k]));
        col.sort_by(f64::total_cmp);
        lo[k] = quantile_sorted(&col, 0.025);
        hi[k] = quantile_sorted(&col, 0.975);
    }
    (lo, hi)
}

/// Values of `model` for every row with coordinate `dim` set to each grid point:
/// `out[i][k]`.
fn overridden(model: &CalibratedModel, x: &Matrix, dim: usize, class: usize, grid: &[f64]) -> Vec<Vec<f64>> {
    x.rows_iter()
        .map(|row| {
            let mut r = row.to_vec();
            grid.iter()
                .map(|&g| {
                    r[dim] = g;
                    model.probability(&r, class)
                })
                .collect()
        })
        .collect()
}

fn check(model: &CalibratedModel, x: &Matrix, dim: usize, class: usize) -> Result<()> {
    model.check_width(x.cols())?;
    if dim >= x.cols() {
        return Err(Error::DimOutOfRange { index: dim as u32, width: x.cols() });
    }
    if class >= model.logits.len() {
        return Err(Error::LabelOutOfRange { label: class as u32, classes: model.logits.len() as u32 });
    }
    if x.rows() == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(())
}

/// Partial dependence of the calibrated `class` probability on `dim`, on a
/// 20-quantile grid, with a percentile bootstrap band over rows.
pub fn pdp(model: &CalibratedModel, x: &Matrix, dim: usize, class: usize, boots: usize, seed: u64) -> Result<EffectCurve> {
    check(model, x, dim, class)?;
    let grid = quantile_grid(&x.column(dim), GRID_KNOTS);
    let table = overridden(model, x, dim, class, &grid);
    let n = table.len();
    let mean_of = |rows: &mut dyn Iterator<Item = usize>| {
        let mut acc = vec![0.0; grid.len()];
        for i in rows {
            for (a, v) in acc.iter_mut().zip(&table[i]) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        acc
    };
    let values = mean_of(&mut (0..n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps: Vec<Vec<f64>> = (0..boots).map(|_| mean_of(&mut (0..n).map(|_| rng.random_range(0..n)))).collect();
    let (ci_lo, ci_hi) = if boots > 0 { percentile_band(&reps, grid.len()) } else { (values.clone(), values.clone()) };
    Ok(EffectCurve { kind: EffectKind::Pdp, dim: dim as u32, class, grid, values, ci_lo, ci_hi })
}

/// Bin of `v` among distinct sorted `edges`: interval `k` is `(e[k-1], e[k]]`,
/// with the first interval closed on the left. Returns `k` in `1..edges.len()`.
fn interval_of(edges: &[f64], v: f64) -> usize {
    let k = edges.partition_point(|&e| e < v);
    k.clamp(1, edges.len() - 1)
}

/// Accumulate per-interval mean effects and center them by the row-weighted
/// mean of interval midpoints.
fn accumulate(sums: &[f64], counts: &[usize]) -> Vec<f64> {
    let mut curve = vec![0.0; sums.len() + 1];
    for k in 0..sums.len() {
        let step = if counts[k] > 0 { sums[k] / counts[k] as f64 } else { 0.0 };
        curve[k + 1] = curve[k] + step;
    }
    let total: usize = counts.iter().sum();
    let mean = (0..sums.len()).map(|k| counts[k] as f64 * (curve[k] + curve[k + 1]) / 2.0).sum::<f64>() / total.max(1) as f64;
    curve.iter_mut().for_each(|v| *v -= mean);
    curve
}

/// Centered accumulated local effects of `dim` on the calibrated `class`
/// probability over quantile edges, with a percentile bootstrap band.
///
/// Centering makes `sum_k n_k (A(e[k-1]) + A(e[k])) / 2` zero, where `n_k`
/// counts rows in interval `k`. A column with fewer than two distinct values
/// yields a single zero knot.
pub fn ale(model: &CalibratedModel, x: &Matrix, dim: usize, class: usize, boots: usize, seed: u64) -> Result<EffectCurve> {
    check(model, x, dim, class)?;
    let column = x.column(dim);
    let mut edges = quantile_grid(&column, GRID_KNOTS);
    edges.dedup();
    if edges.len() < 2 {
        let z = vec![0.0; edges.len()];
        return Ok(EffectCurve { kind: EffectKind::Ale, dim: dim as u32, class, grid: edges, values: z.clone(), ci_lo: z.clone(), ci_hi: z });
    }
    let m = edges.len() - 1;
    // Each row's local effect across its own interval.
    let mut bin = Vec::with_capacity(x.rows());
    let mut effect = Vec::with_capacity(x.rows());
    for (i, row) in x.rows_iter().enumerate() {
        let k = interval_of(&edges, column[i]);
        let mut r = row.to_vec();
        r[dim] = edges[k];
        let upper = model.probability(&r, class);
        r[dim] = edges[k - 1];
        let lower = model.probability(&r, class);
        bin.push(k - 1);
        effect.push(upper - lower);
    }
    let curve_of = |rows: &mut dyn Iterator<Item = usize>| {
        let mut sums = vec![0.0; m];
        let mut counts = vec![0usize; m];
        for i in rows {
            sums[bin[i]] += effect[i];
            counts[bin[i]] += 1;
        }
        accumulate(&sums, &counts)
    };
    let n = x.rows();
    let values = curve_of(&mut (0..n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps: Vec<Vec<f64>> = (0..boots).map(|_| curve_of(&mut (0..n).map(|_| rng.random_range(0..n)))).collect();
    let (ci_lo, ci_hi) = if boots > 0 { percentile_band(&reps, edges.len()) } else { (values.clone(), values.clone()) };
    Ok(EffectCurve { kind: EffectKind::Ale, dim: dim as u32, class, grid: edges, values, ci_lo, ci_hi })
}

/// `|Spearman rho|` between knot positions and curve values; 0 when either
/// is constant or there are fewer than 3 knots.
pub fn monotonicity(curve: &EffectCurve) -> f64 {
    if curve.grid.len() < 3 || curve.grid.len() != curve.values.len() {
        return 0.0;
    }
    let a = midranks(&curve.grid);
    let b = midranks(&curve.values);
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    libm::fabs(sab / libm::sqrt(saa * sbb)).min(1.0)
}
