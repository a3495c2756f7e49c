//! TOML representation of models and templates.
//!
//! ```toml
//! kind = "ctmc"
//!
//! [states]
//! names = ["ready", "accurate", "inaccurate"]
//! initial = "ready"
//! labels = { measuring = ["accurate", "inaccurate"] }
//!
//! [[parameters]]
//! name = "r"
//! unit = "1/s"
//! range = "(0, 1000]"
//!
//! [[transitions]]
//! from = "ready"
//! to = "accurate"
//! weight = "r * p"        # a number or an expression string
//!
//! [rewards.energy]
//! states = { ready = 0.0 }
//! transitions = [{ from = "ready", to = "accurate", value = "e" }]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MarkovModel, ModelKind, ModelTemplate, Parameter, TemplateError, TemplateReward, TemplateTransition};
use crate::expr::{Expr, ExprError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed model file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cannot serialize model: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("bad expression `{text}`: {source}")]
    Expr { text: String, source: ExprError },
    #[error("bad range `{0}`")]
    Range(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("model has free parameters: {0:?}")]
    NotConcrete(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Num(f64),
    Text(String),
}

impl Scalar {
    fn to_expr(&self) -> Result<Expr, FormatError> {
        match self {
            Scalar::Num(x) => Ok(Expr::Num(*x)),
            Scalar::Text(t) => Expr::parse(t).map_err(|source| FormatError::Expr { text: t.clone(), source }),
        }
    }

    fn from_expr(e: &Expr) -> Self {
        match e {
            Expr::Num(x) => Scalar::Num(*x),
            other => Scalar::Text(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatesSection {
    names: Vec<String>,
    initial: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    labels: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterEntry {
    name: String,
    #[serde(default)]
    unit: String,
    range: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: String,
    to: String,
    weight: Scalar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionReward {
    from: String,
    to: String,
    value: Scalar,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardSection {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    states: BTreeMap<String, Scalar>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    transitions: Vec<TransitionReward>,
}

/// Serde mirror of the on-disk format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    kind: ModelKind,
    states: StatesSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    parameters: Vec<ParameterEntry>,
    #[serde(default)]
    transitions: Vec<TransitionEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    rewards: BTreeMap<String, RewardSection>,
}

impl ModelFile {
    pub fn from_template(t: &ModelTemplate) -> Self {
        let name = |i: usize| t.states[i].clone();
        ModelFile {
            kind: t.kind,
            states: StatesSection {
                names: t.states.clone(),
                initial: name(t.initial),
                labels: t.labels.iter().map(|(l, s)| (l.clone(), s.iter().map(|&i| name(i)).collect())).collect(),
            },
            parameters: t
                .parameters
                .iter()
                .map(|p| ParameterEntry { name: p.name.clone(), unit: p.unit.clone(), range: p.range_text() })
                .collect(),
            transitions: t
                .transitions
                .iter()
                .map(|tr| TransitionEntry { from: name(tr.source), to: name(tr.target), weight: Scalar::from_expr(&tr.weight) })
                .collect(),
            rewards: t
                .rewards
                .iter()
                .map(|(rn, r)| {
                    let section = RewardSection {
                        states: r.state.iter().map(|(&s, e)| (name(s), Scalar::from_expr(e))).collect(),
                        transitions: r
                            .transition
                            .iter()
                            .map(|(&(s, d), e)| TransitionReward { from: name(s), to: name(d), value: Scalar::from_expr(e) })
                            .collect(),
                    };
                    (rn.clone(), section)
                })
                .collect(),
        }
    }

    pub fn to_template(&self) -> Result<ModelTemplate, FormatError> {
        let mut t = ModelTemplate::new(self.kind, self.states.names.clone());
        t.initial = t.state(&self.states.initial)?;
        for (label, states) in &self.states.labels {
            let refs: Vec<&str> = states.iter().map(String::as_str).collect();
            t.label(label, &refs)?;
            // keep empty labels so validation can report them
            t.labels.entry(label.clone()).or_default();
        }
        for p in &self.parameters {
            let (lo, hi) = Parameter::parse_range(&p.range).ok_or_else(|| FormatError::Range(p.range.clone()))?;
            t.declare(Parameter::new(&p.name, &p.unit, lo, hi));
        }
        for tr in &self.transitions {
            t.transitions.push(TemplateTransition {
                source: t.state(&tr.from)?,
                target: t.state(&tr.to)?,
                weight: tr.weight.to_expr()?,
            });
        }
        for (rn, r) in &self.rewards {
            let mut tr = TemplateReward::default();
            for (s, v) in &r.states {
                tr.state.insert(t.state(s)?, v.to_expr()?);
            }
            for x in &r.transitions {
                tr.transition.insert((t.state(&x.from)?, t.state(&x.to)?), x.value.to_expr()?);
            }
            t.rewards.insert(rn.clone(), tr);
        }
        t.check()?;
        Ok(t)
    }
}

impl ModelTemplate {
    pub fn from_toml(text: &str) -> Result<Self, FormatError> {
        let file: ModelFile = toml::from_str(text)?;
        file.to_template()
    }

    pub fn to_toml(&self) -> Result<String, FormatError> {
        Ok(toml::to_string(&ModelFile::from_template(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }
}

impl MarkovModel {
    /// Parses a model file without free parameters. The result is not
    /// validated; call [`MarkovModel::validate`].
    pub fn from_toml(text: &str) -> Result<Self, FormatError> {
        let t = ModelTemplate::from_toml(text)?;
        if !t.parameters.is_empty() {
            return Err(FormatError::NotConcrete(t.parameters.iter().map(|p| p.name.clone()).collect()));
        }
        let env = |_: &str| None;
        let n = t.states.len();
        let mut m = MarkovModel::new(t.kind, t.states.clone());
        m.initial = t.initial;
        m.labels = t.labels.clone();
        for tr in &t.transitions {
            let w = tr.weight.eval_num(&env).map_err(|source| FormatError::Expr { text: tr.weight.to_string(), source })?;
            m.add_transition(tr.source, tr.target, w);
        }
        for (name, r) in &t.rewards {
            let mut rs = super::RewardStructure { state: vec![0.0; n], transition: BTreeMap::new() };
            for (&s, e) in &r.state {
                rs.state[s] = e.eval_num(&env).map_err(|source| FormatError::Expr { text: e.to_string(), source })?;
            }
            for (&k, e) in &r.transition {
                let x = e.eval_num(&env).map_err(|source| FormatError::Expr { text: e.to_string(), source })?;
                rs.transition.insert(k, x);
            }
            m.rewards.insert(name.clone(), rs);
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String, FormatError> {
        ModelTemplate::from_model(self).to_toml()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
kind = "dtmc"

[states]
names = ["s0", "done", "fail"]
initial = "s0"
labels = { end = ["done", "fail"] }

[[parameters]]
name = "p"
range = "[0, 1]"

[[transitions]]
from = "s0"
to = "done"
weight = "p"

[[transitions]]
from = "s0"
to = "fail"
weight = "1 - p"

[[transitions]]
from = "done"
to = "done"
weight = 1.0

[rewards.cost]
states = { s0 = 2.5 }
transitions = [{ from = "s0", to = "fail", value = "10 * p" }]
"#;

    #[test]
    fn template_round_trip() {
        let t = ModelTemplate::from_toml(SAMPLE).unwrap();
        let text = t.to_toml().unwrap();
        let again = ModelTemplate::from_toml(&text).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn concrete_model_round_trip() {
        let t = ModelTemplate::from_toml(SAMPLE).unwrap();
        let m = t.bind(&[("p".to_string(), 0.75)].into_iter().collect()).unwrap();
        let again = MarkovModel::from_toml(&m.to_toml().unwrap()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn undeclared_identifier_rejected() {
        let text = SAMPLE.replace("weight = \"p\"", "weight = \"q\"");
        assert!(matches!(ModelTemplate::from_toml(&text), Err(FormatError::Template(TemplateError::UndeclaredParameter(_)))));
    }

    #[test]
    fn concrete_parse_refuses_parameters() {
        assert!(matches!(MarkovModel::from_toml(SAMPLE), Err(FormatError::NotConcrete(_))));
    }
}
