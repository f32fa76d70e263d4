use alloc::format;

use crate::digest::fnv1a64;
use crate::{Error, Result};

/// Evolution settings. Defaults follow the reference configuration
/// (population 30, 150 generations, stall 30, depth cap 10, crossover 0.84,
/// mutation 0.14, reproduction 0.02, constants in [-10, 10], batch = n/50,
/// 1000 tuning steps at learning rate 0.001).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GpConfig {
    pub pop_size: usize,
    pub max_generations: usize,
    pub stall_generations: usize,
    pub max_depth: usize,
    pub init_min_depth: usize,
    pub init_max_depth: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub reproduction_prob: f64,
    pub const_min: f64,
    pub const_max: f64,
    /// Probability that a generated terminal is an ephemeral constant.
    pub const_prob: f64,
    /// Elite fraction among individuals evaluated in isolation.
    pub elite_isolated: f64,
    /// Elite fraction among individuals evaluated inside a team.
    pub elite_ensemble: f64,
    /// Probability that an individual is evaluated inside a team.
    pub ensemble_prob: f64,
    pub tournament_size: usize,
    pub batch_divisor: usize,
    /// Total constant-tuning step budget for a run.
    pub epochs: usize,
    pub tune_steps_per_generation: usize,
    pub learning_rate: f64,
    /// Size penalty weight: fitness = CE + parsimony * nodes / 1000.
    pub parsimony: f64,
    /// Minimum champion CE decrease that resets the stall counter.
    pub stall_tolerance: f64,
    pub epsilon: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            pop_size: 30,
            max_generations: 150,
            stall_generations: 30,
            max_depth: 10,
            init_min_depth: 2,
            init_max_depth: 6,
            crossover_prob: 0.84,
            mutation_prob: 0.14,
            reproduction_prob: 0.02,
            const_min: -10.0,
            const_max: 10.0,
            const_prob: 0.2,
            elite_isolated: 0.033,
            elite_ensemble: 0.10,
            ensemble_prob: 0.75,
            tournament_size: 3,
            batch_divisor: 50,
            epochs: 1000,
            tune_steps_per_generation: 5,
            learning_rate: 0.001,
            parsimony: 1e-4,
            stall_tolerance: 1e-6,
            epsilon: crate::expr::DEFAULT_EPSILON,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("gp config: {msg}")));
        let probs = [
            self.crossover_prob,
            self.mutation_prob,
            self.reproduction_prob,
            self.const_prob,
            self.elite_isolated,
            self.elite_ensemble,
            self.ensemble_prob,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        if (self.crossover_prob + self.mutation_prob + self.reproduction_prob - 1.0).abs() > 1e-9 {
            return bad("crossover + mutation + reproduction must sum to 1");
        }
        if self.pop_size < 2 {
            return bad("population size must be at least 2");
        }
        if self.tournament_size == 0 || self.batch_divisor == 0 {
            return bad("tournament size and batch divisor must be positive");
        }
        if self.init_min_depth > self.init_max_depth || self.init_max_depth > self.max_depth {
            return bad("need init_min_depth <= init_max_depth <= max_depth");
        }
        if !(self.const_min < self.const_max) {
            return bad("constant range is empty");
        }
        if !(self.epsilon > 0.0) || self.learning_rate < 0.0 || self.parsimony < 0.0 {
            return bad("epsilon must be positive; learning rate and parsimony non-negative");
        }
        Ok(())
    }

    /// Mini-batch size `ceil(n_train / batch_divisor)`.
    pub fn batch_size(&self, n_train: usize) -> usize {
        n_train.div_ceil(self.batch_divisor).max(1)
    }

    pub fn digest(&self) -> u64 {
        fnv1a64(format!("{self:?}").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = GpConfig::default();
        c.validate().unwrap();
        assert_eq!(c.batch_size(1000), 20);
        assert_eq!(c.batch_size(1001), 21);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let c = GpConfig { crossover_prob: 0.9, ..GpConfig::default() };
        assert!(c.validate().is_err());
        let c = GpConfig { ensemble_prob: 1.5, ..GpConfig::default() };
        assert!(c.validate().is_err());
    }
}
