//! Symbolic surrogate classifiers over frozen embedding vectors.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece of
//! the pipeline:
//!
//! - [`expr`]: arithmetic expression trees with protected division, the
//!   prefix text format, simplification and structural statistics.
//! - [`data`]: the embedding dataset container, train-only z-scoring,
//!   within-tower 2:1 pooling and stratified validation splits.
//! - [`spfp`]: greedy relevance/redundancy partitioning of coordinates into
//!   disjoint views.
//! - [`gp`]: the cooperative multi-population GP that evolves one population
//!   of per-class logit programs per view.
//! - [`select`]: one-standard-error canonical model selection.
//! - [`calib`]: temperature scaling, reliability bins and probability metrics.
//! - [`metrics`]: AUC and across-run t intervals.
//! - [`analysis`]: additive-term importance, PDP, ALE, monotonicity and
//!   dimension usage statistics.
//!
//! File formats, JSON persistence and the command line live in the `embsurr`
//! companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod calib;
pub mod data;
pub mod digest;
mod error;
pub mod expr;
pub mod gp;
pub mod matrix;
pub mod metrics;
pub mod select;
pub mod special;
pub mod spfp;
pub mod synth;

pub use error::{Error, Result};
pub use expr::{BinOp, Expr, Program, ProgramStats};
pub use matrix::Matrix;
