//! Networks of finite automata with handshake channels, bounded integer
//! variables, guards and assignments; explicit-state exploration and
//! checking of deadlock freedom, invariants and leads-to properties.

mod check;
mod explore;
mod format;
mod suite;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use check::{check, deadlock_core, invariant_core, leads_to_core, CtlQuery, Lasso, Trace, Verdict};
pub use explore::{compose_and_explore, compose_and_explore_capped, Fired, StateGraph, DEFAULT_STATE_CAP};
pub use format::NetworkFile;
pub use suite::{generic_properties, verify_generic_suite, PropertyVerdict, SuiteReport};

use crate::expr::{Expr, ExprError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutomataError {
    #[error("channel `{0}` has no matching sender/receiver pair")]
    UnmatchedChannel(String),
    #[error("state space exceeds {0} states")]
    StateSpaceExceeded(usize),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("unknown automaton `{0}`")]
    UnknownAutomaton(String),
    #[error("variable `{name}` assigned {value}, outside [{min}, {max}]")]
    OutOfRange { name: String, value: i64, min: i64, max: i64 },
    #[error("bad expression `{text}`: {msg}")]
    BadExpression { text: String, msg: String },
    #[error("evaluation error: {0}")]
    Eval(#[from] ExprError),
    #[error("malformed network: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub min: i64,
    pub max: i64,
    pub init: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sync {
    Send(String),
    Receive(String),
    Internal,
}

impl Sync {
    pub fn parse(text: &str) -> Result<Sync, AutomataError> {
        let t = text.trim();
        if t.is_empty() {
            Ok(Sync::Internal)
        } else if let Some(c) = t.strip_suffix('!') {
            Ok(Sync::Send(c.to_string()))
        } else if let Some(c) = t.strip_suffix('?') {
            Ok(Sync::Receive(c.to_string()))
        } else {
            Err(AutomataError::Malformed(format!("sync `{t}` must end in `!` or `?`")))
        }
    }

    pub fn text(&self) -> String {
        match self {
            Sync::Send(c) => format!("{c}!"),
            Sync::Receive(c) => format!("{c}?"),
            Sync::Internal => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub var: usize,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub guard: Option<Expr>,
    pub sync: Sync,
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Automaton {
    pub name: String,
    pub locations: Vec<String>,
    pub initial: usize,
    /// Locations where the absence of successors is intended.
    pub terminal: BTreeSet<usize>,
    pub edges: Vec<Edge>,
}

impl Automaton {
    pub fn location(&self, name: &str) -> Result<usize, AutomataError> {
        self.locations
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| AutomataError::UnknownLocation(format!("{}.{}", self.name, name)))
    }
}

/// Application property given in the network file.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedQuery {
    pub id: String,
    pub description: String,
    pub query: CtlQuery,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutomatonNetwork {
    pub name: String,
    pub variables: Vec<Variable>,
    pub automata: Vec<Automaton>,
    /// (current, new) variable pairs describing the managed configuration.
    pub config_pairs: Vec<(String, String)>,
    pub properties: Vec<NamedQuery>,
}

impl AutomatonNetwork {
    pub fn variable(&self, name: &str) -> Result<usize, AutomataError> {
        self.variables.iter().position(|v| v.name == name).ok_or_else(|| AutomataError::UnknownVariable(name.to_string()))
    }

    pub fn automaton(&self, name: &str) -> Result<usize, AutomataError> {
        self.automata.iter().position(|a| a.name == name).ok_or_else(|| AutomataError::UnknownAutomaton(name.to_string()))
    }

    pub fn automaton_mut(&mut self, name: &str) -> Result<&mut Automaton, AutomataError> {
        let i = self.automaton(name)?;
        Ok(&mut self.automata[i])
    }

    /// Every channel must have a sender and a receiver in distinct automata.
    pub fn check_channels(&self) -> Result<(), AutomataError> {
        let mut senders: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        let mut receivers: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for (ai, a) in self.automata.iter().enumerate() {
            for e in &a.edges {
                match &e.sync {
                    Sync::Send(c) => {
                        senders.entry(c).or_default().insert(ai);
                    }
                    Sync::Receive(c) => {
                        receivers.entry(c).or_default().insert(ai);
                    }
                    Sync::Internal => {}
                }
            }
        }
        let channels: BTreeSet<&str> = senders.keys().chain(receivers.keys()).copied().collect();
        for c in channels {
            let s = senders.get(c).cloned().unwrap_or_default();
            let r = receivers.get(c).cloned().unwrap_or_default();
            let paired = s.iter().any(|a| r.iter().any(|b| a != b));
            if !paired {
                return Err(AutomataError::UnmatchedChannel(c.to_string()));
            }
        }
        Ok(())
    }

    /// Checks that guards, assignments and predicates only mention declared
    /// variables and locations.
    pub fn check_references(&self) -> Result<(), AutomataError> {
        for a in &self.automata {
            for e in &a.edges {
                let exprs = e.guard.iter().chain(e.assignments.iter().map(|x| &x.value));
                for ex in exprs {
                    for id in ex.identifiers() {
                        self.variable(&id)?;
                    }
                }
            }
        }
        for q in &self.properties {
            for ex in q.query.predicates() {
                for id in ex.identifiers() {
                    self.resolve_atom(&id)?;
                }
            }
        }
        for (c, n) in &self.config_pairs {
            self.variable(c)?;
            self.variable(n)?;
        }
        Ok(())
    }

    /// Resolves an identifier used in a state predicate.
    pub(crate) fn resolve_atom(&self, id: &str) -> Result<Atom, AutomataError> {
        if let Some((a, l)) = id.split_once('.') {
            let ai = self.automaton(a)?;
            let li = self.automata[ai].location(l)?;
            return Ok(Atom::Location(ai, li));
        }
        Ok(Atom::Variable(self.variable(id)?))
    }

    pub fn initial_state(&self) -> Vec<i64> {
        self.automata.iter().map(|a| a.initial as i64).chain(self.variables.iter().map(|v| v.init)).collect()
    }

    /// Human-readable description of a packed state.
    pub fn describe(&self, state: &[i64]) -> String {
        let n = self.automata.len();
        let locs: Vec<String> =
            self.automata.iter().enumerate().map(|(i, a)| format!("{}.{}", a.name, a.locations[state[i] as usize])).collect();
        let vars: Vec<String> = self.variables.iter().enumerate().map(|(i, v)| format!("{}={}", v.name, state[n + i])).collect();
        format!("({}) [{}]", locs.join(", "), vars.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Atom {
    Location(usize, usize),
    Variable(usize),
}

fn parse_expr(text: &str) -> Result<Expr, AutomataError> {
    Expr::parse(text).map_err(|e| AutomataError::BadExpression { text: text.to_string(), msg: e.to_string() })
}
