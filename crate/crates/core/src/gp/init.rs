use alloc::vec::Vec;

use rand::Rng;

use super::config::GpConfig;
use super::model::Individual;
use crate::expr::{BinOp, Expr, Program};
use crate::spfp::ViewPartition;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeMethod {
    /// Every branch reaches the target depth.
    Full,
    /// Branches may stop early at a terminal.
    Grow,
}

pub(crate) fn random_op<R: Rng + ?Sized>(rng: &mut R) -> BinOp {
    BinOp::ALL[rng.random_range(0..BinOp::ALL.len())]
}

pub(crate) fn random_const<R: Rng + ?Sized>(rng: &mut R, config: &GpConfig) -> f64 {
    rng.random_range(config.const_min..=config.const_max)
}

pub(crate) fn random_terminal<R: Rng + ?Sized>(rng: &mut R, view: &[usize], config: &GpConfig) -> Expr {
    if view.is_empty() || rng.random_bool(config.const_prob) {
        Expr::Const(random_const(rng, config))
    } else {
        Expr::Dim(view[rng.random_range(0..view.len())] as u32)
    }
}

/// Random tree of depth at most `depth` over the view's coordinates.
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, view: &[usize], depth: usize, method: TreeMethod, config: &GpConfig) -> Expr {
    fn go<R: Rng + ?Sized>(rng: &mut R, view: &[usize], level: usize, depth: usize, method: TreeMethod, config: &GpConfig) -> Expr {
        let internal = level < depth
            && (level == 0 || method == TreeMethod::Full || rng.random_bool(0.5));
        if internal {
            let op = random_op(rng);
            let a = go(rng, view, level + 1, depth, method, config);
            let b = go(rng, view, level + 1, depth, method, config);
            Expr::bin(op, a, b)
        } else {
            random_terminal(rng, view, config)
        }
    }
    go(rng, view, 0, depth, method, config)
}

/// Ramped half-and-half populations, one per view.
///
/// Individual `i` of a population uses depth `init_min_depth + i mod span`
/// and alternates between full and grow every `span` individuals. Each
/// population draws from its own generator in `rngs`.
pub fn init_populations<R: Rng>(
    partition: &ViewPartition,
    classes: usize,
    config: &GpConfig,
    rngs: &mut [R],
) -> Result<Vec<Vec<Individual>>> {
    if rngs.len() != partition.len() {
        return Err(Error::Shape { expected: partition.len(), found: rngs.len() });
    }
    let span = config.init_max_depth - config.init_min_depth + 1;
    partition
        .views
        .iter()
        .zip(rngs.iter_mut())
        .enumerate()
        .map(|(v, (view, rng))| {
            if view.is_empty() {
                return Err(Error::InvalidArgument(alloc::format!("view {v} is empty")));
            }
            Ok((0..config.pop_size)
                .map(|i| {
                    let depth = config.init_min_depth + i % span;
                    let method = if (i / span).is_multiple_of(2) { TreeMethod::Full } else { TreeMethod::Grow };
                    let genes = (0..classes).map(|_| Program::new(random_tree(rng, view, depth, method, config))).collect();
                    Individual::new(genes, v)
                })
                .collect())
        })
        .collect()
}
