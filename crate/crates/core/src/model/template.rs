use std::collections::{BTreeMap, BTreeSet};
use std::ops::Bound;

use thiserror::Error;

use super::{MarkovModel, ModelKind, RewardStructure, ValidationReport};
use crate::expr::{Expr, ExprError, Value};

/// A named free parameter with a unit and a legal interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub unit: String,
    pub lower: Bound<f64>,
    pub upper: Bound<f64>,
}

impl Parameter {
    pub fn new(name: &str, unit: &str, lower: Bound<f64>, upper: Bound<f64>) -> Self {
        Parameter { name: name.to_string(), unit: unit.to_string(), lower, upper }
    }

    /// Parameter ranging over [0, 1].
    pub fn probability(name: &str) -> Self {
        Self::new(name, "", Bound::Included(0.0), Bound::Included(1.0))
    }

    /// Parameter ranging over [0, inf).
    pub fn non_negative(name: &str, unit: &str) -> Self {
        Self::new(name, unit, Bound::Included(0.0), Bound::Unbounded)
    }

    /// Parameter ranging over (0, inf).
    pub fn positive(name: &str, unit: &str) -> Self {
        Self::new(name, unit, Bound::Excluded(0.0), Bound::Unbounded)
    }

    pub fn contains(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        let lo = match self.lower {
            Bound::Included(a) => x >= a,
            Bound::Excluded(a) => x > a,
            Bound::Unbounded => true,
        };
        let hi = match self.upper {
            Bound::Included(b) => x <= b,
            Bound::Excluded(b) => x < b,
            Bound::Unbounded => true,
        };
        lo && hi
    }

    /// Interval in the usual mathematical notation, e.g. `(0, 1000]`.
    pub fn range_text(&self) -> String {
        let lo = match self.lower {
            Bound::Included(a) => format!("[{a}"),
            Bound::Excluded(a) => format!("({a}"),
            Bound::Unbounded => "(-inf".to_string(),
        };
        let hi = match self.upper {
            Bound::Included(b) => format!("{b}]"),
            Bound::Excluded(b) => format!("{b})"),
            Bound::Unbounded => "inf)".to_string(),
        };
        format!("{lo}, {hi}")
    }

    pub fn parse_range(text: &str) -> Option<(Bound<f64>, Bound<f64>)> {
        let t = text.trim();
        let open = t.chars().next()?;
        let close = t.chars().last()?;
        let inner = &t[1..t.len() - 1];
        let (a, b) = inner.split_once(',')?;
        let num = |s: &str| -> Option<Option<f64>> {
            match s.trim() {
                "-inf" | "inf" | "+inf" => Some(None),
                other => other.parse::<f64>().ok().map(Some),
            }
        };
        let lo = match (open, num(a)?) {
            (_, None) => Bound::Unbounded,
            ('[', Some(x)) => Bound::Included(x),
            ('(', Some(x)) => Bound::Excluded(x),
            _ => return None,
        };
        let hi = match (close, num(b)?) {
            (_, None) => Bound::Unbounded,
            (']', Some(x)) => Bound::Included(x),
            (')', Some(x)) => Bound::Excluded(x),
            _ => return None,
        };
        Some((lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateTransition {
    pub source: usize,
    pub target: usize,
    pub weight: Expr,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateReward {
    pub state: BTreeMap<usize, Expr>,
    pub transition: BTreeMap<(usize, usize), Expr>,
}

/// Markov model skeleton whose weights and rewards are expressions over
/// declared parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTemplate {
    pub kind: ModelKind,
    pub states: Vec<String>,
    pub labels: BTreeMap<String, Vec<usize>>,
    pub initial: usize,
    pub transitions: Vec<TemplateTransition>,
    pub rewards: BTreeMap<String, TemplateReward>,
    pub parameters: Vec<Parameter>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("expression references undeclared parameter `{0}`")]
    UndeclaredParameter(String),
    #[error("parameter `{0}` declared twice")]
    DuplicateParameter(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BindError {
    #[error("missing binding for parameter `{0}`")]
    MissingParameter(String),
    #[error("parameter `{name}` = {value} is outside its legal range")]
    OutOfRange { name: String, value: f64 },
    #[error("bound model violates invariants: {0}")]
    InvariantViolation(String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] ExprError),
}

impl ModelTemplate {
    pub fn new(kind: ModelKind, states: Vec<String>) -> Self {
        ModelTemplate {
            kind,
            states,
            labels: BTreeMap::new(),
            initial: 0,
            transitions: Vec::new(),
            rewards: BTreeMap::new(),
            parameters: Vec::new(),
        }
    }

    /// Wraps a concrete model as a template without free parameters.
    pub fn from_model(m: &MarkovModel) -> Self {
        let mut t = ModelTemplate::new(m.kind, m.states.clone());
        t.labels = m.labels.clone();
        t.initial = m.initial;
        t.transitions = m
            .transitions
            .iter()
            .map(|tr| TemplateTransition { source: tr.source, target: tr.target, weight: Expr::Num(tr.weight) })
            .collect();
        for (name, r) in &m.rewards {
            let mut tr = TemplateReward::default();
            for (s, &x) in r.state.iter().enumerate() {
                if x != 0.0 {
                    tr.state.insert(s, Expr::Num(x));
                }
            }
            for (&k, &x) in &r.transition {
                tr.transition.insert(k, Expr::Num(x));
            }
            t.rewards.insert(name.clone(), tr);
        }
        t
    }

    pub fn state(&self, name: &str) -> Result<usize, TemplateError> {
        self.states.iter().position(|s| s == name).ok_or_else(|| TemplateError::UnknownState(name.to_string()))
    }

    pub fn declare(&mut self, p: Parameter) -> &mut Self {
        self.parameters.push(p);
        self
    }

    pub fn transition(&mut self, from: &str, to: &str, weight: Expr) -> Result<&mut Self, TemplateError> {
        let (s, t) = (self.state(from)?, self.state(to)?);
        self.transitions.push(TemplateTransition { source: s, target: t, weight });
        Ok(self)
    }

    pub fn label(&mut self, label: &str, states: &[&str]) -> Result<&mut Self, TemplateError> {
        let idx = states.iter().map(|s| self.state(s)).collect::<Result<Vec<_>, _>>()?;
        self.labels.entry(label.to_string()).or_default().extend(idx);
        Ok(self)
    }

    pub fn state_reward(&mut self, reward: &str, state: &str, value: Expr) -> Result<&mut Self, TemplateError> {
        let s = self.state(state)?;
        self.rewards.entry(reward.to_string()).or_default().state.insert(s, value);
        Ok(self)
    }

    pub fn transition_reward(&mut self, reward: &str, from: &str, to: &str, value: Expr) -> Result<&mut Self, TemplateError> {
        let (s, t) = (self.state(from)?, self.state(to)?);
        self.rewards.entry(reward.to_string()).or_default().transition.insert((s, t), value);
        Ok(self)
    }

    fn expressions(&self) -> impl Iterator<Item = &Expr> {
        self.transitions
            .iter()
            .map(|t| &t.weight)
            .chain(self.rewards.values().flat_map(|r| r.state.values().chain(r.transition.values())))
    }

    /// Checks that parameters are unique and every expression only
    /// references declared parameters.
    pub fn check(&self) -> Result<(), TemplateError> {
        let mut declared = BTreeSet::new();
        for p in &self.parameters {
            if !declared.insert(p.name.as_str()) {
                return Err(TemplateError::DuplicateParameter(p.name.clone()));
            }
        }
        for e in self.expressions() {
            for id in e.identifiers() {
                if !declared.contains(id.as_str()) {
                    return Err(TemplateError::UndeclaredParameter(id));
                }
            }
        }
        Ok(())
    }

    /// Replaces parameter `name` by `with`, an expression over `new_params`
    /// (which are declared in its place).
    pub fn reparameterize(mut self, name: &str, with: &Expr, new_params: Vec<Parameter>) -> Result<Self, TemplateError> {
        let pos = self
            .parameters
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| TemplateError::UnknownParameter(name.to_string()))?;
        self.parameters.remove(pos);
        for p in new_params {
            if !self.parameters.iter().any(|q| q.name == p.name) {
                self.parameters.push(p);
            }
        }
        let subst = |id: &str| (id == name).then(|| with.clone());
        for t in &mut self.transitions {
            t.weight = t.weight.substitute(&subst);
        }
        for r in self.rewards.values_mut() {
            for e in r.state.values_mut().chain(r.transition.values_mut()) {
                *e = e.substitute(&subst);
            }
        }
        self.check()?;
        Ok(self)
    }

    /// Evaluates every expression under `bindings`. Zero-weight transitions
    /// (and rewards attached to them) are dropped. Bindings for names that
    /// are not parameters of this template are ignored.
    pub fn bind(&self, bindings: &BTreeMap<String, f64>) -> Result<MarkovModel, BindError> {
        for p in &self.parameters {
            let value = *bindings.get(&p.name).ok_or_else(|| BindError::MissingParameter(p.name.clone()))?;
            if !p.contains(value) {
                return Err(BindError::OutOfRange { name: p.name.clone(), value });
            }
        }
        let env = |id: &str| -> Option<Value> {
            if self.parameters.iter().any(|p| p.name == id) {
                bindings.get(id).map(|&x| Value::Num(x))
            } else {
                None
            }
        };

        let n = self.states.len();
        let mut model = MarkovModel::new(self.kind, self.states.clone());
        model.initial = self.initial;
        model.labels = self.labels.clone();
        let mut kept = BTreeSet::new();
        for t in &self.transitions {
            let w = t.weight.eval_num(&env)?;
            if w == 0.0 {
                continue;
            }
            kept.insert((t.source, t.target));
            model.add_transition(t.source, t.target, w);
        }
        for (name, r) in &self.rewards {
            let mut rs = RewardStructure { state: vec![0.0; n], transition: BTreeMap::new() };
            for (&s, e) in &r.state {
                let x = e.eval_num(&env)?;
                if s < n {
                    rs.state[s] = x;
                } else {
                    return Err(BindError::InvariantViolation(format!("reward `{name}` on missing state {s}")));
                }
            }
            for (&k, e) in &r.transition {
                let x = e.eval_num(&env)?;
                if kept.contains(&k) {
                    rs.transition.insert(k, x);
                }
            }
            model.rewards.insert(name.clone(), rs);
        }

        let report: ValidationReport = model.validate();
        if !report.is_valid() {
            return Err(BindError::InvariantViolation(report.to_string()));
        }
        Ok(model)
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }
}
