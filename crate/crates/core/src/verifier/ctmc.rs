//! Expected cumulative reward of a CTMC by uniformization.
//!
//! With uniformized chain `P = I + Q/q` and `N ~ Poisson(qT)`,
//! `E[∫_0^T rho(X_t) dt] = (1/q) Σ_k P(N > k) (π_0 P^k) rho`,
//! where `rho(s)` is the state reward rate plus the transition rewards
//! weighted by their rates.

use super::VerifyError;
use crate::deadline::Deadline;
use crate::model::{MarkovModel, ModelKind};

pub const UNIFORMIZATION_PADDING: f64 = 1.02;
pub const TRUNCATION_EPSILON: f64 = 1e-6;
pub const DEFAULT_TERM_CAP: usize = 1_000_000;
/// Terms computed between deadline checks.
const BLOCK: usize = 256;

#[derive(Debug, Clone)]
pub struct CtmcOptions {
    pub term_cap: usize,
    pub epsilon: f64,
}

impl Default for CtmcOptions {
    fn default() -> Self {
        CtmcOptions { term_cap: DEFAULT_TERM_CAP, epsilon: TRUNCATION_EPSILON }
    }
}

pub fn cumulative_reward(
    model: &MarkovModel,
    reward_name: &str,
    horizon: f64,
    deadline: &Deadline,
    opts: &CtmcOptions,
) -> Result<f64, VerifyError> {
    if model.kind != ModelKind::Ctmc {
        return Err(VerifyError::IncompatibleProperty("cumulative reward requires a CTMC".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(VerifyError::InvalidHorizon(horizon));
    }
    let reward = model.reward(reward_name).ok_or_else(|| VerifyError::UnknownReward(reward_name.to_string()))?;
    let n = model.num_states();
    let rows = model.rows();

    let mut exit = vec![0.0f64; n];
    let mut rho = vec![0.0f64; n];
    for s in 0..n {
        rho[s] = reward.state_reward(s);
        for &(t, rate) in &rows[s] {
            exit[s] += rate;
            rho[s] += rate * reward.transition_reward(s, t);
        }
    }
    let rho_max = rho.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if rho_max == 0.0 {
        return Ok(0.0);
    }
    let max_exit = exit.iter().fold(0.0f64, |a, &b| a.max(b));
    if max_exit == 0.0 {
        return Ok(rho[model.initial] * horizon);
    }

    let q = UNIFORMIZATION_PADDING * max_exit;
    let lambda = q * horizon;
    let ln_lambda = lambda.ln();

    let mut pi = vec![0.0f64; n];
    pi[model.initial] = 1.0;
    let mut next = vec![0.0f64; n];

    let mut value = 0.0;
    let mut cdf = 0.0;
    // Σ_{j<=k} P(N > j); the truncation tail is (rho_max/q)(lambda - this)
    let mut tail_sum = 0.0;
    let mut ln_fact = 0.0;
    let mut k = 0usize;
    loop {
        if k.is_multiple_of(BLOCK) && deadline.expired() {
            return Err(VerifyError::DeadlineExceeded);
        }
        if k >= opts.term_cap {
            return Err(VerifyError::HorizonOverflow { terms: k });
        }
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let pmf = (-lambda + k as f64 * ln_lambda - ln_fact).exp();
        cdf += pmf;
        let survival = (1.0 - cdf).max(0.0);
        tail_sum += survival;

        let dot: f64 = pi.iter().zip(&rho).map(|(p, r)| p * r).sum();
        value += survival * dot / q;

        let tail = rho_max / q * (lambda - tail_sum).max(0.0);
        if cdf >= 1.0 - opts.epsilon && tail <= opts.epsilon {
            break;
        }

        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n {
            let p = pi[s];
            if p == 0.0 {
                continue;
            }
            next[s] += p * (1.0 - exit[s] / q);
            for &(t, rate) in &rows[s] {
                next[t] += p * rate / q;
            }
        }
        std::mem::swap(&mut pi, &mut next);
        k += 1;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RewardStructure;

    fn run(m: &MarkovModel, r: &str, t: f64) -> f64 {
        cumulative_reward(m, r, t, &Deadline::none(), &CtmcOptions::default()).unwrap()
    }

    #[test]
    fn single_state_integral() {
        let mut m = MarkovModel::new(ModelKind::Ctmc, vec!["s".into()]);
        m.rewards.insert("one".into(), RewardStructure { state: vec![1.0], ..Default::default() });
        assert!((run(&m, "one", 3.125) - 3.125).abs() < 1e-12);
    }

    #[test]
    fn two_state_closed_form() {
        // a -(2)-> b -(3)-> a, reward 1 in a: I(T) = 3T/5 + 2/25 (1 - e^{-5T})
        let mut m = MarkovModel::new(ModelKind::Ctmc, vec!["a".into(), "b".into()]);
        m.add_transition(0, 1, 2.0);
        m.add_transition(1, 0, 3.0);
        m.rewards.insert("in_a".into(), RewardStructure { state: vec![1.0, 0.0], ..Default::default() });
        for t in [0.1f64, 1.0, 4.0, 30.0] {
            let exact = 0.6 * t + 0.08 * (1.0 - (-5.0 * t).exp());
            assert!((run(&m, "in_a", t) - exact).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn zero_reward_is_zero() {
        let mut m = MarkovModel::new(ModelKind::Ctmc, vec!["a".into(), "b".into()]);
        m.add_transition(0, 1, 2.0);
        m.rewards.insert("z".into(), RewardStructure { state: vec![0.0, 0.0], ..Default::default() });
        assert_eq!(run(&m, "z", 10.0), 0.0);
    }

    #[test]
    fn term_cap_overflow() {
        let mut m = MarkovModel::new(ModelKind::Ctmc, vec!["a".into(), "b".into()]);
        m.add_transition(0, 1, 1000.0);
        m.add_transition(1, 0, 1000.0);
        m.rewards.insert("x".into(), RewardStructure { state: vec![1.0, 0.0], ..Default::default() });
        let opts = CtmcOptions { term_cap: 100, ..Default::default() };
        assert!(matches!(cumulative_reward(&m, "x", 10.0, &Deadline::none(), &opts), Err(VerifyError::HorizonOverflow { .. })));
    }

    #[test]
    fn expired_deadline_aborts() {
        let mut m = MarkovModel::new(ModelKind::Ctmc, vec!["a".into(), "b".into()]);
        m.add_transition(0, 1, 1.0);
        m.rewards.insert("x".into(), RewardStructure { state: vec![1.0, 0.0], ..Default::default() });
        let d = Deadline::after(std::time::Duration::ZERO);
        assert_eq!(cumulative_reward(&m, "x", 1.0, &d, &CtmcOptions::default()), Err(VerifyError::DeadlineExceeded));
    }
}
