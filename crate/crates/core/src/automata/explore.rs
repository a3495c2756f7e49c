use std::collections::{HashMap, VecDeque};

use super::{Atom, AutomataError, AutomatonNetwork, Sync};
use crate::expr::{BinaryOp, Expr, UnaryOp, Value};

pub const DEFAULT_STATE_CAP: usize = 10_000_000;

/// Expression compiled against a network: identifiers become state slots.
#[derive(Debug, Clone)]
pub(crate) enum Compiled {
    Num(f64),
    Bool(bool),
    Slot(usize),
    At(usize, i64),
    Unary(UnaryOp, Box<Compiled>),
    Binary(BinaryOp, Box<Compiled>, Box<Compiled>),
    Call(String, Vec<Compiled>),
}

impl Compiled {
    pub(crate) fn new(e: &Expr, net: &AutomatonNetwork) -> Result<Compiled, AutomataError> {
        let n = net.automata.len();
        Ok(match e {
            Expr::Num(x) => Compiled::Num(*x),
            Expr::Bool(b) => Compiled::Bool(*b),
            Expr::Ident(id) => match net.resolve_atom(id)? {
                Atom::Location(a, l) => Compiled::At(a, l as i64),
                Atom::Variable(v) => Compiled::Slot(n + v),
            },
            Expr::Unary(op, x) => Compiled::Unary(*op, Box::new(Self::new(x, net)?)),
            Expr::Binary(op, a, b) => Compiled::Binary(*op, Box::new(Self::new(a, net)?), Box::new(Self::new(b, net)?)),
            Expr::Call(f, args) => Compiled::Call(f.clone(), args.iter().map(|a| Self::new(a, net)).collect::<Result<_, _>>()?),
        })
    }

    pub(crate) fn eval(&self, s: &[i64]) -> Result<Value, AutomataError> {
        Ok(match self {
            Compiled::Num(x) => Value::Num(*x),
            Compiled::Bool(b) => Value::Bool(*b),
            Compiled::Slot(i) => Value::Num(s[*i] as f64),
            Compiled::At(a, l) => Value::Bool(s[*a] == *l),
            Compiled::Unary(UnaryOp::Neg, x) => Value::Num(-num(x.eval(s)?)),
            Compiled::Unary(UnaryOp::Not, x) => Value::Bool(!truthy(x.eval(s)?)),
            Compiled::Binary(BinaryOp::And, a, b) => Value::Bool(truthy(a.eval(s)?) && truthy(b.eval(s)?)),
            Compiled::Binary(BinaryOp::Or, a, b) => Value::Bool(truthy(a.eval(s)?) || truthy(b.eval(s)?)),
            Compiled::Binary(op, a, b) => {
                let (x, y) = (num(a.eval(s)?), num(b.eval(s)?));
                match op {
                    BinaryOp::Eq => Value::Bool(x == y),
                    BinaryOp::Ne => Value::Bool(x != y),
                    BinaryOp::Lt => Value::Bool(x < y),
                    BinaryOp::Le => Value::Bool(x <= y),
                    BinaryOp::Gt => Value::Bool(x > y),
                    BinaryOp::Ge => Value::Bool(x >= y),
                    BinaryOp::Add => Value::Num(x + y),
                    BinaryOp::Sub => Value::Num(x - y),
                    BinaryOp::Mul => Value::Num(x * y),
                    BinaryOp::Div => Value::Num(x / y),
                    BinaryOp::And | BinaryOp::Or => unreachable!(),
                }
            }
            Compiled::Call(f, args) => {
                let vals = args.iter().map(|a| a.eval(s).map(lit)).collect::<Result<Vec<_>, _>>()?;
                Expr::Call(f.clone(), vals).eval(&|_: &str| None)?
            }
        })
    }

    pub(crate) fn holds(&self, s: &[i64]) -> Result<bool, AutomataError> {
        Ok(truthy(self.eval(s)?))
    }
}

fn lit(v: Value) -> Expr {
    match v {
        Value::Num(x) => Expr::Num(x),
        Value::Bool(b) => Expr::Bool(b),
    }
}

fn num(v: Value) -> f64 {
    match v {
        Value::Num(x) => x,
        Value::Bool(b) => b as u8 as f64,
    }
}

/// Integer variables double as booleans (non-zero is true).
fn truthy(v: Value) -> bool {
    match v {
        Value::Bool(b) => b,
        Value::Num(x) => x != 0.0,
    }
}

#[derive(Debug, Clone)]
struct CompiledEdge {
    source: i64,
    target: i64,
    guard: Option<Compiled>,
    assignments: Vec<(usize, Compiled)>,
}

/// Which edges produced a transition of the composed network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fired {
    Internal { automaton: usize, edge: usize },
    Sync { sender: (usize, usize), receiver: (usize, usize) },
}

pub(crate) struct Semantics<'a> {
    net: &'a AutomatonNetwork,
    edges: Vec<Vec<CompiledEdge>>,
}

impl<'a> Semantics<'a> {
    pub(crate) fn new(net: &'a AutomatonNetwork) -> Result<Self, AutomataError> {
        let mut edges = Vec::new();
        for a in &net.automata {
            let mut ce = Vec::new();
            for e in &a.edges {
                ce.push(CompiledEdge {
                    source: e.source as i64,
                    target: e.target as i64,
                    guard: e.guard.as_ref().map(|g| Compiled::new(g, net)).transpose()?,
                    assignments: e
                        .assignments
                        .iter()
                        .map(|x| Ok((net.automata.len() + x.var, Compiled::new(&x.value, net)?)))
                        .collect::<Result<_, AutomataError>>()?,
                });
            }
            edges.push(ce);
        }
        Ok(Semantics { net, edges })
    }

    fn enabled(&self, s: &[i64], a: usize, e: usize) -> Result<bool, AutomataError> {
        let ce = &self.edges[a][e];
        if s[a] != ce.source {
            return Ok(false);
        }
        match &ce.guard {
            Some(g) => g.holds(s),
            None => Ok(true),
        }
    }

    fn apply(&self, s: &mut [i64], a: usize, e: usize) -> Result<(), AutomataError> {
        let ce = &self.edges[a][e];
        s[a] = ce.target;
        let n = self.net.automata.len();
        for (slot, value) in &ce.assignments {
            let x = value.eval(s)?.as_num()?;
            let v = x.round() as i64;
            let var = &self.net.variables[slot - n];
            if v < var.min || v > var.max || (x - v as f64).abs() > 1e-9 {
                return Err(AutomataError::OutOfRange { name: var.name.clone(), value: v, min: var.min, max: var.max });
            }
            s[*slot] = v;
        }
        Ok(())
    }

    /// Applies `fired` to `s`. Returns `None` if the transition is not enabled.
    pub(crate) fn fire(&self, s: &[i64], fired: Fired) -> Result<Option<Vec<i64>>, AutomataError> {
        let mut next = s.to_vec();
        match fired {
            Fired::Internal { automaton, edge } => {
                if self.net.automata[automaton].edges[edge].sync != Sync::Internal || !self.enabled(s, automaton, edge)? {
                    return Ok(None);
                }
                self.apply(&mut next, automaton, edge)?;
            }
            Fired::Sync { sender, receiver } => {
                let se = &self.net.automata[sender.0].edges[sender.1];
                let re = &self.net.automata[receiver.0].edges[receiver.1];
                let matched = matches!((&se.sync, &re.sync), (Sync::Send(a), Sync::Receive(b)) if a == b);
                if !matched
                    || sender.0 == receiver.0
                    || !self.enabled(s, sender.0, sender.1)?
                    || !self.enabled(s, receiver.0, receiver.1)?
                {
                    return Ok(None);
                }
                // sender's assignments run first, then the receiver's
                self.apply(&mut next, sender.0, sender.1)?;
                self.apply(&mut next, receiver.0, receiver.1)?;
            }
        }
        Ok(Some(next))
    }

    pub(crate) fn successors(&self, s: &[i64]) -> Result<Vec<(Vec<i64>, Fired)>, AutomataError> {
        let mut out = Vec::new();
        let automata = &self.net.automata;
        for (a, aut) in automata.iter().enumerate() {
            for (e, edge) in aut.edges.iter().enumerate() {
                if !self.enabled(s, a, e)? {
                    continue;
                }
                match &edge.sync {
                    Sync::Internal => {
                        let f = Fired::Internal { automaton: a, edge: e };
                        if let Some(n) = self.fire(s, f)? {
                            out.push((n, f));
                        }
                    }
                    Sync::Send(c) => {
                        for (b, other) in automata.iter().enumerate() {
                            if b == a {
                                continue;
                            }
                            for (f_idx, oe) in other.edges.iter().enumerate() {
                                if matches!(&oe.sync, Sync::Receive(d) if d == c) && self.enabled(s, b, f_idx)? {
                                    let f = Fired::Sync { sender: (a, e), receiver: (b, f_idx) };
                                    if let Some(n) = self.fire(s, f)? {
                                        out.push((n, f));
                                    }
                                }
                            }
                        }
                    }
                    Sync::Receive(_) => {}
                }
            }
        }
        Ok(out)
    }
}

/// Reachable state graph in breadth-first order; state 0 is initial.
#[derive(Debug, Clone)]
pub struct StateGraph {
    pub states: Vec<Vec<i64>>,
    pub successors: Vec<Vec<(usize, Fired)>>,
    /// BFS tree: predecessor and the transition taken from it.
    pub parent: Vec<Option<(usize, Fired)>>,
    /// Per state: true if some automaton sits in a location declared terminal.
    pub terminal: Vec<bool>,
}

impl StateGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.successors.iter().map(|v| v.iter().map(|(t, _)| *t).collect()).collect()
    }

    /// Shortest path (state ids) from the initial state to `s`.
    pub fn path_to(&self, s: usize) -> Vec<usize> {
        let mut path = vec![s];
        let mut cur = s;
        while let Some((p, _)) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Transition label between two adjacent states.
    pub fn label(&self, from: usize, to: usize) -> Option<Fired> {
        self.successors[from].iter().find(|(t, _)| *t == to).map(|(_, f)| *f)
    }
}

pub fn compose_and_explore(net: &AutomatonNetwork) -> Result<StateGraph, AutomataError> {
    compose_and_explore_capped(net, DEFAULT_STATE_CAP)
}

pub fn compose_and_explore_capped(net: &AutomatonNetwork, cap: usize) -> Result<StateGraph, AutomataError> {
    net.check_channels()?;
    let sem = Semantics::new(net)?;
    let init = net.initial_state();
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut g = StateGraph { states: Vec::new(), successors: Vec::new(), parent: Vec::new(), terminal: Vec::new() };
    let terminal_of = |s: &[i64]| net.automata.iter().enumerate().any(|(i, a)| a.terminal.contains(&(s[i] as usize)));

    index.insert(init.clone(), 0);
    g.terminal.push(terminal_of(&init));
    g.states.push(init);
    g.successors.push(Vec::new());
    g.parent.push(None);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let succ = sem.successors(&g.states[i])?;
        let mut out = Vec::with_capacity(succ.len());
        for (next, fired) in succ {
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    let j = g.states.len();
                    if j >= cap {
                        return Err(AutomataError::StateSpaceExceeded(cap));
                    }
                    index.insert(next.clone(), j);
                    g.terminal.push(terminal_of(&next));
                    g.states.push(next);
                    g.successors.push(Vec::new());
                    g.parent.push(Some((i, fired)));
                    queue.push_back(j);
                    j
                }
            };
            out.push((j, fired));
        }
        g.successors[i] = out;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_self_loop() {
        let net = AutomatonNetwork::from_toml(
            r#"
name = "t"
[[automata]]
name = "A"
locations = ["L"]
initial = "L"
[[automata.edges]]
from = "L"
to = "L"
"#,
        )
        .unwrap();
        let g = compose_and_explore(&net).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn unmatched_send() {
        let net = AutomatonNetwork::from_toml(
            r#"
name = "t"
[[automata]]
name = "A"
locations = ["L", "M"]
initial = "L"
[[automata.edges]]
from = "L"
to = "M"
sync = "ping!"
"#,
        )
        .unwrap();
        assert_eq!(compose_and_explore(&net).unwrap_err(), AutomataError::UnmatchedChannel("ping".into()));
    }

    #[test]
    fn handshake_runs_sender_assignments_first() {
        let net = AutomatonNetwork::from_toml(
            r#"
name = "t"
[[variables]]
name = "x"
range = [0, 5]
[[variables]]
name = "y"
range = [0, 5]

[[automata]]
name = "S"
locations = ["A", "B"]
initial = "A"
terminal = ["B"]
[[automata.edges]]
from = "A"
to = "B"
sync = "go!"
assign = ["x = 2"]

[[automata]]
name = "R"
locations = ["A", "B"]
initial = "A"
[[automata.edges]]
from = "A"
to = "B"
sync = "go?"
assign = ["y = x + 1"]
"#,
        )
        .unwrap();
        let g = compose_and_explore(&net).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.states[1], vec![1, 1, 2, 3]);
        assert!(g.terminal[1]);
    }

    #[test]
    fn state_cap() {
        let net = AutomatonNetwork::from_toml(
            r#"
name = "t"
[[variables]]
name = "x"
range = [0, 100]
[[automata]]
name = "A"
locations = ["L"]
initial = "L"
[[automata.edges]]
from = "L"
to = "L"
guard = "x < 100"
assign = ["x = x + 1"]
"#,
        )
        .unwrap();
        assert_eq!(compose_and_explore_capped(&net, 10).unwrap_err(), AutomataError::StateSpaceExceeded(10));
        assert_eq!(compose_and_explore(&net).unwrap().len(), 101);
    }
}
