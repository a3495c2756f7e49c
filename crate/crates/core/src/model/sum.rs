use super::MarkovModel;
use crate::deadline::Deadline;
use crate::verifier::{ctmc, CtmcOptions, VerifyError};

/// Parallel composition of independent CTMCs. Expected cumulative rewards
/// of the product equal the sum of the per-component values, so the
/// product chain is never built.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentSum {
    components: Vec<MarkovModel>,
}

impl IndependentSum {
    pub fn new(models: Vec<MarkovModel>) -> Self {
        IndependentSum { components: models }
    }

    pub fn components(&self) -> &[MarkovModel] {
        &self.components
    }

    /// Sum of the components' expected cumulative `reward` over `[0, horizon]`.
    /// Components without the reward structure contribute zero.
    pub fn cumulative_reward(&self, reward: &str, horizon: f64, deadline: &Deadline) -> Result<f64, VerifyError> {
        let opts = CtmcOptions::default();
        let mut total = 0.0;
        let mut found = false;
        for m in &self.components {
            if m.reward(reward).is_none() {
                continue;
            }
            found = true;
            total += ctmc::cumulative_reward(m, reward, horizon, deadline, &opts)?;
        }
        if !found && !self.components.is_empty() {
            return Err(VerifyError::UnknownReward(reward.to_string()));
        }
        Ok(total)
    }
}

/// Builds the decomposition handle for `models` (see [`IndependentSum`]).
pub fn build_independent_sum(models: Vec<MarkovModel>) -> IndependentSum {
    IndependentSum::new(models)
}
