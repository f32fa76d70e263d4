//! Behavioural audit of a fitted model: term importance, effect curves,
//! monotonicity, and coordinate usage across logits.
//!
//! Everything here takes the model as its per-class logit programs (see
//! [`crate::gp::SurrogateModel::class_logits`]).

mod effects;
mod terms;
mod usage;

pub use effects::{ale, monotonicity, pdp, quantile_grid, CalibratedModel, EffectCurve, EffectKind, GRID_KNOTS};
pub use terms::{additive_terms, importance, max_power, AdditiveTerm, Importance};
pub use usage::{overlap_sets, usage_histogram, SparsitySummary};
