use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::netcore::StepperKind;
use crate::rewards::{ClassPriors, RewardKind};

/// Hyperparameters shared by every trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub stepper: StepperKind,
    /// Primal step size.
    pub eta: f64,
    pub batch_size: usize,
    /// Outer iterations `T`.
    pub iterations: u64,
    /// Inner iterations `T'` per level (DAMP only).
    pub inner_iterations: u64,
    /// Reward inside primal gradients; must be sigmoid.
    pub primal_reward: RewardKind,
    /// Reward behind the dual statistics and DAMP levels; zero-one gives the
    /// count-based "-NS" variants.
    pub dual_reward: RewardKind,
    /// Minibatch order seed (network initialisation has its own seed).
    pub seed: u64,
    /// A trace record every this many iterations, plus the last one.
    pub eval_every: u64,
    pub stratified: bool,
    /// Cross-entropy epochs before DAMP fine tuning.
    pub pretrain_epochs: usize,
    /// Optional cross-entropy epochs before DNEMSIS (0 = start from the
    /// initialisation, as in the plain algorithm).
    pub warm_start_epochs: usize,
    /// Layer after which the DAMP network is split; defaults to keeping only
    /// the output layer in the upper part.
    pub damp_split: Option<usize>,
    /// Weight `C` of the structured hinge against `½‖w‖²`.
    pub struct_c: f64,
    /// User-supplied positive prior; the empirical training prior otherwise.
    pub prior: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stepper: StepperKind::ConstantSgd,
            eta: 0.05,
            batch_size: 64,
            iterations: 2000,
            inner_iterations: 10,
            primal_reward: RewardKind::Sigmoid,
            dual_reward: RewardKind::Sigmoid,
            seed: 0,
            eval_every: 10,
            stratified: false,
            pretrain_epochs: 5,
            warm_start_epochs: 0,
            damp_split: None,
            struct_c: 1.0,
            prior: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.iterations == 0 || self.inner_iterations == 0 {
            return Err(Error::Config("iteration budgets must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval cadence must be at least 1".into()));
        }
        if self.primal_reward != RewardKind::Sigmoid {
            return Err(Error::NonDifferentiable(self.primal_reward.name()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("step size must be positive, got {}", self.eta)));
        }
        if !(self.struct_c >= 0.0 && self.struct_c.is_finite()) {
            return Err(Error::Config(format!("C must be non-negative, got {}", self.struct_c)));
        }
        Ok(())
    }

    /// Priors used to scale class-normalised rewards.
    pub fn priors(&self, train: &Dataset) -> Result<ClassPriors> {
        match self.prior {
            Some(p) => ClassPriors::user(p),
            None => ClassPriors::empirical(train.labels()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { iterations: 0, ..Default::default() },
            TrainConfig { inner_iterations: 0, ..Default::default() },
            TrainConfig { primal_reward: RewardKind::ZeroOne, ..Default::default() },
            TrainConfig { eta: -1.0, ..Default::default() },
            TrainConfig { eval_every: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
