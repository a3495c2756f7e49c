//! Labelled Markov chains with reward structures, and parametric templates.

mod format;
mod sum;
mod template;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use format::{FormatError, ModelFile};
pub use sum::{build_independent_sum, IndependentSum};
pub use template::{BindError, ModelTemplate, Parameter, TemplateError, TemplateReward, TemplateTransition};

/// Tolerance for DTMC row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dtmc,
    Ctmc,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Dtmc => write!(f, "dtmc"),
            ModelKind::Ctmc => write!(f, "ctmc"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub source: usize,
    pub target: usize,
    /// Probability for a DTMC, rate (1/s) for a CTMC.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardStructure {
    /// One entry per state. Missing trailing entries are treated as zero.
    pub state: Vec<f64>,
    pub transition: BTreeMap<(usize, usize), f64>,
}

impl RewardStructure {
    pub fn state_reward(&self, s: usize) -> f64 {
        self.state.get(s).copied().unwrap_or(0.0)
    }

    pub fn transition_reward(&self, s: usize, t: usize) -> f64 {
        self.transition.get(&(s, t)).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.state.iter().all(|&r| r == 0.0) && self.transition.values().all(|&r| r == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    pub kind: ModelKind,
    pub states: Vec<String>,
    pub labels: BTreeMap<String, Vec<usize>>,
    pub transitions: Vec<Transition>,
    pub initial: usize,
    pub rewards: BTreeMap<String, RewardStructure>,
}

/// One invariant violation found by [`MarkovModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateState(String),
    InitialOutOfRange(usize),
    DanglingTransition { index: usize, source: usize, target: usize },
    DuplicateTransition { source: String, target: String },
    RowSum { state: String, sum: f64, deficit: f64 },
    InvalidProbability { source: String, target: String, weight: f64 },
    NonPositiveRate { source: String, target: String, rate: f64 },
    SelfLoopRate { state: String, rate: f64 },
    EmptyLabel(String),
    DanglingLabel { label: String, state: usize },
    BadStateReward { reward: String, state: String, value: f64 },
    BadTransitionReward { reward: String, source: usize, target: usize, value: f64 },
    RewardOnMissingTransition { reward: String, source: usize, target: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateState(s) => write!(f, "duplicate state name `{s}`"),
            Violation::InitialOutOfRange(i) => write!(f, "initial state index {i} does not exist"),
            Violation::DanglingTransition { index, source, target } => {
                write!(f, "transition #{index} ({source} -> {target}) references a missing state")
            }
            Violation::DuplicateTransition { source, target } => {
                write!(f, "duplicate transition {source} -> {target}")
            }
            Violation::RowSum { state, sum, deficit } => {
                write!(f, "state `{state}` outgoing probabilities sum to {sum} (deficit {deficit})")
            }
            Violation::InvalidProbability { source, target, weight } => {
                write!(f, "transition {source} -> {target} has probability {weight} outside [0,1]")
            }
            Violation::NonPositiveRate { source, target, rate } => {
                write!(f, "transition {source} -> {target} has non-positive rate {rate}")
            }
            Violation::SelfLoopRate { state, rate } => {
                write!(f, "state `{state}` has a self-loop rate {rate}")
            }
            Violation::EmptyLabel(l) => write!(f, "label `{l}` names no state"),
            Violation::DanglingLabel { label, state } => {
                write!(f, "label `{label}` references missing state {state}")
            }
            Violation::BadStateReward { reward, state, value } => {
                write!(f, "reward `{reward}` on state `{state}` is {value}")
            }
            Violation::BadTransitionReward { reward, source, target, value } => {
                write!(f, "reward `{reward}` on transition {source} -> {target} is {value}")
            }
            Violation::RewardOnMissingTransition { reward, source, target } => {
                write!(f, "reward `{reward}` is attached to missing transition {source} -> {target}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl MarkovModel {
    pub fn new(kind: ModelKind, states: Vec<String>) -> Self {
        MarkovModel { kind, states, labels: BTreeMap::new(), transitions: Vec::new(), initial: 0, rewards: BTreeMap::new() }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// States carrying `label`. A state's own name also acts as a label.
    pub fn label_states(&self, label: &str) -> Option<Vec<usize>> {
        if let Some(v) = self.labels.get(label) {
            return Some(v.clone());
        }
        self.state_index(label).map(|i| vec![i])
    }

    /// Indicator vector of `label`.
    pub fn label_mask(&self, label: &str) -> Option<Vec<bool>> {
        let states = self.label_states(label)?;
        let mut mask = vec![false; self.num_states()];
        for s in states {
            if s < mask.len() {
                mask[s] = true;
            }
        }
        Some(mask)
    }

    pub fn add_transition(&mut self, source: usize, target: usize, weight: f64) {
        self.transitions.push(Transition { source, target, weight });
    }

    pub fn add_label(&mut self, label: &str, states: &[usize]) {
        self.labels.entry(label.to_string()).or_default().extend_from_slice(states);
    }

    /// Outgoing transitions grouped by source state, in insertion order.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.num_states()];
        for t in &self.transitions {
            if t.source < rows.len() {
                rows[t.source].push((t.target, t.weight));
            }
        }
        rows
    }

    pub fn reward(&self, name: &str) -> Option<&RewardStructure> {
        self.rewards.get(name)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let n = self.num_states();

        let mut seen = BTreeSet::new();
        for s in &self.states {
            if !seen.insert(s.as_str()) {
                v.push(Violation::DuplicateState(s.clone()));
            }
        }
        if self.initial >= n {
            v.push(Violation::InitialOutOfRange(self.initial));
        }

        let name = |i: usize| self.states.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
        let mut pairs = BTreeSet::new();
        let mut row_sum = vec![0.0f64; n];
        let mut has_out = vec![false; n];
        for (index, t) in self.transitions.iter().enumerate() {
            if t.source >= n || t.target >= n {
                v.push(Violation::DanglingTransition { index, source: t.source, target: t.target });
                continue;
            }
            if !pairs.insert((t.source, t.target)) {
                v.push(Violation::DuplicateTransition { source: name(t.source), target: name(t.target) });
            }
            has_out[t.source] = true;
            match self.kind {
                ModelKind::Dtmc => {
                    if !(t.weight.is_finite() && (0.0..=1.0).contains(&t.weight)) {
                        v.push(Violation::InvalidProbability {
                            source: name(t.source),
                            target: name(t.target),
                            weight: t.weight,
                        });
                    }
                    row_sum[t.source] += t.weight;
                }
                ModelKind::Ctmc => {
                    if t.source == t.target {
                        v.push(Violation::SelfLoopRate { state: name(t.source), rate: t.weight });
                    } else if !(t.weight.is_finite() && t.weight > 0.0) {
                        v.push(Violation::NonPositiveRate { source: name(t.source), target: name(t.target), rate: t.weight });
                    }
                }
            }
        }
        if self.kind == ModelKind::Dtmc {
            for s in 0..n {
                if has_out[s] && (row_sum[s] - 1.0).abs() > ROW_SUM_TOLERANCE {
                    v.push(Violation::RowSum { state: name(s), sum: row_sum[s], deficit: 1.0 - row_sum[s] });
                }
            }
        }

        for (label, states) in &self.labels {
            if states.is_empty() {
                v.push(Violation::EmptyLabel(label.clone()));
            }
            for &s in states {
                if s >= n {
                    v.push(Violation::DanglingLabel { label: label.clone(), state: s });
                }
            }
        }

        for (rname, r) in &self.rewards {
            for (s, &value) in r.state.iter().enumerate() {
                if !(value.is_finite() && value >= 0.0) {
                    v.push(Violation::BadStateReward { reward: rname.clone(), state: name(s), value });
                }
            }
            for (&(s, t), &value) in &r.transition {
                if !(value.is_finite() && value >= 0.0) {
                    v.push(Violation::BadTransitionReward { reward: rname.clone(), source: s, target: t, value });
                }
                if !pairs.contains(&(s, t)) {
                    v.push(Violation::RewardOnMissingTransition { reward: rname.clone(), source: s, target: t });
                }
            }
        }

        ValidationReport { violations: v }
    }

    /// Canonical text used for hashing; independent of transition insertion order.
    pub fn canonical_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "kind {}", self.kind);
        let _ = writeln!(out, "initial {}", self.initial);
        for s in &self.states {
            let _ = writeln!(out, "state {s}");
        }
        for (l, states) in &self.labels {
            let mut st = states.clone();
            st.sort_unstable();
            let _ = writeln!(out, "label {l} {st:?}");
        }
        let mut ts: Vec<_> = self.transitions.iter().map(|t| (t.source, t.target, t.weight.to_bits())).collect();
        ts.sort_unstable();
        for (s, t, w) in ts {
            let _ = writeln!(out, "t {s} {t} {:e}", f64::from_bits(w));
        }
        for (name, r) in &self.rewards {
            let _ = writeln!(out, "reward {name}");
            for (s, x) in r.state.iter().enumerate() {
                if *x != 0.0 {
                    let _ = writeln!(out, "  s {s} {x:e}");
                }
            }
            for ((s, t), x) in &r.transition {
                if *x != 0.0 {
                    let _ = writeln!(out, "  t {s} {t} {x:e}");
                }
            }
        }
        out
    }

    pub fn digest(&self) -> String {
        crate::digest::sha256_hex(self.canonical_text().as_bytes())
    }
}
