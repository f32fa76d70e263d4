//! Cooperative multi-population genetic programming.
//!
//! One population per view; each individual carries one logit program per
//! class over its view's coordinates. Class logits of a team (one individual
//! per view) are the sums of the per-view programs, and fitness is the
//! softmax cross-entropy of those logits plus a size penalty.

mod config;
mod fitness;
mod init;
mod model;
mod run;
mod tune;
mod variation;

pub use config::GpConfig;
pub use fitness::{softmax_ce, softmax_in_place, team_logits, PROB_CLIP};
pub use init::{init_populations, random_tree, TreeMethod};
pub use model::{Individual, SurrogateModel};
pub use run::{run, run_traced, RunData, RunTrace};
pub use tune::{ce_and_gradient, constants, set_constants, tune_constants, TuneOutcome};
pub use variation::{point_mutate, subtree_crossover};
