//! Quantitative verification of reachability and reward properties.

mod batch;
pub mod ctmc;
pub mod dtmc;
pub mod linear;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batch::{
    verify_config_space, verify_config_space_with, BatchEntry, BatchOutcome, ConfigRecord, LatencyInjection, ParametricSystem,
    TemplateSpace,
};
pub use ctmc::CtmcOptions;

use crate::deadline::Deadline;
use crate::model::{IndependentSum, MarkovModel, ModelKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("incompatible property: {0}")]
    IncompatibleProperty(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown reward structure `{0}`")]
    UnknownReward(String),
    #[error("iterative solver did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("expected reward diverges: state `{state}` cannot reach the target")]
    DivergentReward { state: String },
    #[error("uniformization needs more than {terms} terms")]
    HorizonOverflow { terms: usize },
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("threshold must be finite, got {0}")]
    InvalidThreshold(f64),
    #[error("model construction failed: {0}")]
    Model(String),
    #[error("deadline exceeded")]
    DeadlineExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparison {
    /// Inclusive lower bound.
    Ge,
    /// Inclusive upper bound.
    Le,
    /// Numeric query without a bound.
    Query,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> Option<bool> {
        match self {
            Comparison::Ge => Some(value >= threshold),
            Comparison::Le => Some(value <= threshold),
            Comparison::Query => None,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Ge => ">=",
            Comparison::Le => "<=",
            Comparison::Query => "=?",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Property {
    ProbReach { bound: Comparison, threshold: f64, target: String },
    CumulReward { reward: String, bound: Comparison, threshold: f64, horizon: f64 },
    ReachReward { reward: String, bound: Comparison, threshold: f64, target: String },
}

impl Property {
    pub fn bound(&self) -> (Comparison, f64) {
        match self {
            Property::ProbReach { bound, threshold, .. }
            | Property::CumulReward { bound, threshold, .. }
            | Property::ReachReward { bound, threshold, .. } => (*bound, *threshold),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bound().0 != Comparison::Query
    }

    fn check(&self) -> Result<(), VerifyError> {
        let (bound, threshold) = self.bound();
        if bound != Comparison::Query && !threshold.is_finite() {
            return Err(VerifyError::InvalidThreshold(threshold));
        }
        if let Property::CumulReward { horizon, .. } = self {
            if !(horizon.is_finite() && *horizon > 0.0) {
                return Err(VerifyError::InvalidHorizon(*horizon));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |c: Comparison, t: f64| match c {
            Comparison::Query => "=?".to_string(),
            _ => format!("{}{}", c.symbol(), t),
        };
        match self {
            Property::ProbReach { bound, threshold, target } => {
                write!(f, "P{} [ F \"{}\" ]", b(*bound, *threshold), target)
            }
            Property::CumulReward { reward, bound, threshold, horizon } => {
                write!(f, "R{{\"{}\"}}{} [ C<={} ]", reward, b(*bound, *threshold), horizon)
            }
            Property::ReachReward { reward, bound, threshold, target } => {
                write!(f, "R{{\"{}\"}}{} [ F \"{}\" ]", reward, b(*bound, *threshold), target)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub property: Property,
    pub value: f64,
    /// `None` for `=?` queries.
    pub satisfied: Option<bool>,
    /// Seconds.
    pub wall_time: f64,
    pub model_digest: String,
}

impl VerificationResult {
    fn new(property: &Property, value: f64, started: Instant, digest: String) -> Self {
        let (bound, threshold) = property.bound();
        VerificationResult {
            property: property.clone(),
            value,
            satisfied: bound.holds(value, threshold),
            wall_time: started.elapsed().as_secs_f64(),
            model_digest: digest,
        }
    }
}

/// What gets verified for one configuration: a single model, or a
/// composition of independent CTMCs plus per-reward constant offsets.
#[derive(Debug, Clone)]
pub enum Subject {
    Single(MarkovModel),
    Parallel { sum: IndependentSum, offsets: BTreeMap<String, f64> },
}

impl Subject {
    pub fn digest(&self) -> String {
        match self {
            Subject::Single(m) => m.digest(),
            Subject::Parallel { sum, offsets } => {
                let mut text = String::from("parallel\n");
                for m in sum.components() {
                    text.push_str(&m.digest());
                    text.push('\n');
                }
                for (k, v) in offsets {
                    text.push_str(&format!("offset {k} {v:e}\n"));
                }
                crate::digest::sha256_hex(text.as_bytes())
            }
        }
    }
}

pub fn dtmc_reach_probability(model: &MarkovModel, target: &str) -> Result<f64, VerifyError> {
    dtmc::reach_probability(model, target)
}

pub fn dtmc_expected_reward(model: &MarkovModel, reward: &str, target: &str) -> Result<f64, VerifyError> {
    dtmc::expected_reward(model, reward, target)
}

pub fn ctmc_cumulative_reward(model: &MarkovModel, reward: &str, horizon: f64) -> Result<f64, VerifyError> {
    ctmc::cumulative_reward(model, reward, horizon, &Deadline::none(), &CtmcOptions::default())
}

pub fn evaluate(model: &MarkovModel, property: &Property) -> Result<VerificationResult, VerifyError> {
    evaluate_with(model, property, &Deadline::none())
}

pub fn evaluate_with(model: &MarkovModel, property: &Property, deadline: &Deadline) -> Result<VerificationResult, VerifyError> {
    let started = Instant::now();
    let value = value_of(model, property, deadline)?;
    Ok(VerificationResult::new(property, value, started, model.digest()))
}

fn value_of(model: &MarkovModel, property: &Property, deadline: &Deadline) -> Result<f64, VerifyError> {
    property.check()?;
    match (property, model.kind) {
        (Property::ProbReach { target, .. }, ModelKind::Dtmc) => dtmc::reach_probability(model, target),
        (Property::ReachReward { reward, target, .. }, ModelKind::Dtmc) => dtmc::expected_reward(model, reward, target),
        (Property::CumulReward { reward, horizon, .. }, ModelKind::Ctmc) => {
            ctmc::cumulative_reward(model, reward, *horizon, deadline, &CtmcOptions::default())
        }
        (p, k) => Err(VerifyError::IncompatibleProperty(format!("{p} on a {k} model"))),
    }
}

pub fn evaluate_subject(subject: &Subject, property: &Property, deadline: &Deadline) -> Result<VerificationResult, VerifyError> {
    match subject {
        Subject::Single(m) => evaluate_with(m, property, deadline),
        Subject::Parallel { sum, offsets } => {
            let started = Instant::now();
            property.check()?;
            let Property::CumulReward { reward, horizon, .. } = property else {
                return Err(VerifyError::IncompatibleProperty(format!(
                    "{property} on a parallel composition (only cumulative rewards decompose)"
                )));
            };
            let value = sum.cumulative_reward(reward, *horizon, deadline)? + offsets.get(reward).copied().unwrap_or(0.0);
            Ok(VerificationResult::new(property, value, started, subject.digest()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fx_like() -> MarkovModel {
        let mut m = MarkovModel::new(ModelKind::Dtmc, vec!["s0".into(), "done".into(), "fail".into()]);
        m.add_transition(0, 1, 0.9);
        m.add_transition(0, 2, 0.1);
        m.add_label("done", &[1]);
        m
    }

    #[test]
    fn inclusive_bound_at_threshold() {
        let p = Property::ProbReach { bound: Comparison::Ge, threshold: 0.9, target: "done".into() };
        let r = evaluate(&fx_like(), &p).unwrap();
        assert_eq!(r.value, 0.9);
        assert_eq!(r.satisfied, Some(true));
        assert!(r.wall_time >= 0.0);
    }

    #[test]
    fn ctmc_property_on_dtmc_is_incompatible() {
        let p = Property::CumulReward { reward: "x".into(), bound: Comparison::Le, threshold: 1.0, horizon: 1.0 };
        assert!(matches!(evaluate(&fx_like(), &p), Err(VerifyError::IncompatibleProperty(_))));
    }

    #[test]
    fn display_forms() {
        let p = Property::CumulReward { reward: "measure".into(), bound: Comparison::Ge, threshold: 20.0, horizon: 3.125 };
        assert_eq!(p.to_string(), "R{\"measure\"}>=20 [ C<=3.125 ]");
        let q = Property::ReachReward { reward: "price".into(), bound: Comparison::Query, threshold: 0.0, target: "end".into() };
        assert_eq!(q.to_string(), "R{\"price\"}=? [ F \"end\" ]");
    }
}
