//! TOML representation of automata networks.
//!
//! Edges may carry `select = ["v:0..2"]`, which expands the edge into one
//! copy per value with `v` substituted in the guard and assignments.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use super::{parse_expr, Assignment, AutomataError, Automaton, AutomatonNetwork, CtlQuery, Edge, NamedQuery, Sync, Variable};
use crate::expr::Expr;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableEntry {
    name: String,
    range: [i64; 2],
    #[serde(default)]
    init: i64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    from: String,
    to: String,
    #[serde(default)]
    sync: String,
    #[serde(default)]
    guard: Option<String>,
    #[serde(default)]
    assign: Vec<String>,
    #[serde(default)]
    select: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutomatonEntry {
    name: String,
    locations: Vec<String>,
    initial: String,
    #[serde(default)]
    terminal: Vec<String>,
    #[serde(default)]
    edges: Vec<EdgeEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropertyEntry {
    id: String,
    #[serde(default)]
    description: String,
    kind: String,
    #[serde(default)]
    p: Option<String>,
    #[serde(default)]
    q: Option<String>,
    #[serde(default)]
    pred: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    name: String,
    #[serde(default)]
    config_pairs: Vec<[String; 2]>,
    #[serde(default)]
    variables: Vec<VariableEntry>,
    automata: Vec<AutomatonEntry>,
    #[serde(default)]
    properties: Vec<PropertyEntry>,
}

fn parse_assignment(text: &str) -> Result<(String, String), AutomataError> {
    let b = text.as_bytes();
    for i in 0..b.len() {
        if b[i] != b'=' {
            continue;
        }
        let next_eq = b.get(i + 1) == Some(&b'=');
        let prev_op = i > 0 && matches!(b[i - 1], b'=' | b'!' | b'<' | b'>');
        if !next_eq && !prev_op {
            let lhs = text[..i].trim().to_string();
            let rhs = text[i + 1..].trim().to_string();
            if lhs.is_empty() || rhs.is_empty() {
                break;
            }
            return Ok((lhs, rhs));
        }
    }
    Err(AutomataError::Malformed(format!("assignment `{text}` must have the form `var = expr`")))
}

fn parse_select(text: &str) -> Result<(String, i64, i64), AutomataError> {
    let bad = || AutomataError::Malformed(format!("select `{text}` must have the form `v:lo..hi`"));
    let (name, range) = text.split_once(':').ok_or_else(bad)?;
    let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
    let lo = lo.trim().parse().map_err(|_| bad())?;
    let hi = hi.trim().parse().map_err(|_| bad())?;
    Ok((name.trim().to_string(), lo, hi))
}

fn parse_query(p: &PropertyEntry) -> Result<CtlQuery, AutomataError> {
    let need = |x: &Option<String>, what: &str| {
        x.as_deref().ok_or_else(|| AutomataError::Malformed(format!("property {} needs `{what}`", p.id))).and_then(parse_expr)
    };
    match p.kind.as_str() {
        "deadlock_free" => Ok(CtlQuery::DeadlockFree),
        "invariant" => Ok(CtlQuery::Invariant(need(&p.pred, "pred")?)),
        "leads_to" => Ok(CtlQuery::LeadsTo(need(&p.p, "p")?, need(&p.q, "q")?)),
        other => Err(AutomataError::Malformed(format!("unknown property kind `{other}`"))),
    }
}

impl NetworkFile {
    pub fn to_network(&self) -> Result<AutomatonNetwork, AutomataError> {
        let variables: Vec<Variable> = self
            .variables
            .iter()
            .map(|v| Variable { name: v.name.clone(), min: v.range[0], max: v.range[1], init: v.init })
            .collect();
        let mut net = AutomatonNetwork {
            name: self.name.clone(),
            variables,
            automata: Vec::new(),
            config_pairs: self.config_pairs.iter().map(|[a, b]| (a.clone(), b.clone())).collect(),
            properties: Vec::new(),
        };
        for v in &net.variables {
            if v.min > v.max || v.init < v.min || v.init > v.max {
                return Err(AutomataError::OutOfRange { name: v.name.clone(), value: v.init, min: v.min, max: v.max });
            }
        }
        for a in &self.automata {
            let mut aut = Automaton {
                name: a.name.clone(),
                locations: a.locations.clone(),
                initial: 0,
                terminal: BTreeSet::new(),
                edges: Vec::new(),
            };
            aut.initial = aut.location(&a.initial)?;
            for t in &a.terminal {
                let l = aut.location(t)?;
                aut.terminal.insert(l);
            }
            for e in &a.edges {
                let source = aut.location(&e.from)?;
                let target = aut.location(&e.to)?;
                let sync = Sync::parse(&e.sync)?;
                let guard = e.guard.as_deref().map(parse_expr).transpose()?;
                let assigns = e
                    .assign
                    .iter()
                    .map(|s| {
                        let (lhs, rhs) = parse_assignment(s)?;
                        Ok((lhs, parse_expr(&rhs)?))
                    })
                    .collect::<Result<Vec<_>, AutomataError>>()?;
                let selects = e.select.iter().map(|s| parse_select(s)).collect::<Result<Vec<_>, _>>()?;
                for binding in expand(&selects) {
                    let subst = |id: &str| binding.iter().find(|(n, _)| n == id).map(|(_, v)| Expr::Num(*v as f64));
                    let assignments = assigns
                        .iter()
                        .map(|(lhs, rhs)| Ok(Assignment { var: net.variable(lhs)?, value: rhs.substitute(&subst) }))
                        .collect::<Result<Vec<_>, AutomataError>>()?;
                    aut.edges.push(Edge {
                        source,
                        target,
                        guard: guard.as_ref().map(|g| g.substitute(&subst)),
                        sync: sync.clone(),
                        assignments,
                    });
                }
            }
            net.automata.push(aut);
        }
        for p in &self.properties {
            net.properties.push(NamedQuery { id: p.id.clone(), description: p.description.clone(), query: parse_query(p)? });
        }
        net.check_references()?;
        Ok(net)
    }
}

fn expand(selects: &[(String, i64, i64)]) -> Vec<Vec<(String, i64)>> {
    let mut out = vec![Vec::new()];
    for (name, lo, hi) in selects {
        let mut next = Vec::new();
        for prefix in &out {
            for v in *lo..=*hi {
                let mut b: Vec<(String, i64)> = prefix.clone();
                b.push((name.clone(), v));
                next.push(b);
            }
        }
        out = next;
    }
    out
}

impl AutomatonNetwork {
    pub fn from_toml(text: &str) -> Result<Self, AutomataError> {
        let file: NetworkFile = toml::from_str(text).map_err(|e| AutomataError::Malformed(e.to_string()))?;
        file.to_network()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AutomataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AutomataError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_split_ignores_comparisons() {
        assert_eq!(parse_assignment("x = y == 1").unwrap(), ("x".into(), "y == 1".into()));
        assert_eq!(parse_assignment("newSpeed = 0").unwrap(), ("newSpeed".into(), "0".into()));
        assert!(parse_assignment("x == 1").is_err());
    }

    #[test]
    fn select_expands_edges() {
        let net = AutomatonNetwork::from_toml(
            r#"
name = "t"
[[variables]]
name = "x"
range = [0, 3]

[[automata]]
name = "A"
locations = ["L"]
initial = "L"
[[automata.edges]]
from = "L"
to = "L"
select = ["v:0..3"]
guard = "x != v"
assign = ["x = v"]
"#,
        )
        .unwrap();
        assert_eq!(net.automata[0].edges.len(), 4);
        assert_eq!(net.automata[0].edges[2].assignments[0].value, Expr::Num(2.0));
    }

    #[test]
    fn unknown_variable_rejected() {
        let r = AutomatonNetwork::from_toml(
            r#"
name = "t"
[[automata]]
name = "A"
locations = ["L"]
initial = "L"
[[automata.edges]]
from = "L"
to = "L"
guard = "y == 1"
"#,
        );
        assert_eq!(r, Err(AutomataError::UnknownVariable("y".into())));
    }
}
