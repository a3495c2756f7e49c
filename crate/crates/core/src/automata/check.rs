use std::collections::VecDeque;
use std::fmt;

use super::explore::{Compiled, Fired, Semantics, StateGraph};
use super::{AutomataError, AutomatonNetwork};
use crate::expr::Expr;

/// The three query shapes: `A[] not deadlock`, `A[] (p -> A<> q)`, `A[] pred`.
#[derive(Debug, Clone, PartialEq)]
pub enum CtlQuery {
    DeadlockFree,
    LeadsTo(Expr, Expr),
    Invariant(Expr),
}

impl CtlQuery {
    pub fn leads_to(p: &str, q: &str) -> Result<Self, AutomataError> {
        Ok(CtlQuery::LeadsTo(super::parse_expr(p)?, super::parse_expr(q)?))
    }

    pub fn invariant(pred: &str) -> Result<Self, AutomataError> {
        Ok(CtlQuery::Invariant(super::parse_expr(pred)?))
    }

    pub fn predicates(&self) -> Vec<&Expr> {
        match self {
            CtlQuery::DeadlockFree => vec![],
            CtlQuery::LeadsTo(p, q) => vec![p, q],
            CtlQuery::Invariant(p) => vec![p],
        }
    }
}

impl fmt::Display for CtlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CtlQuery::DeadlockFree => write!(f, "A[] not deadlock"),
            CtlQuery::LeadsTo(p, q) => write!(f, "A[] (({p}) -> A<> ({q}))"),
            CtlQuery::Invariant(p) => write!(f, "A[] ({p})"),
        }
    }
}

/// Path through a graph starting at state 0. With `loop_back = Some(i)`
/// the last state has an edge back to `states[i]`, closing a lasso.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    pub states: Vec<usize>,
    pub loop_back: Option<usize>,
}

/// A counterexample over a concrete state graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub states: Vec<usize>,
    /// `steps[i]` leads from `states[i]` to `states[i + 1]`; a lasso adds a
    /// final step back to `states[loop_back]`.
    pub steps: Vec<Fired>,
    pub loop_back: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Holds,
    Violated(Trace),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

fn bfs_parents(succ: &[Vec<usize>], sources: &[usize], allowed: &dyn Fn(usize) -> bool) -> Vec<Option<usize>> {
    // parent[s] = Some(s) marks a source
    let mut parent = vec![None; succ.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if parent[s].is_none() && allowed(s) {
            parent[s] = Some(s);
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &t in &succ[s] {
            if parent[t].is_none() && allowed(t) {
                parent[t] = Some(s);
                queue.push_back(t);
            }
        }
    }
    parent
}

fn unwind(parent: &[Option<usize>], s: usize) -> Vec<usize> {
    let mut path = vec![s];
    let mut cur = s;
    while let Some(p) = parent[cur] {
        if p == cur {
            break;
        }
        path.push(p);
        cur = p;
    }
    path.reverse();
    path
}

/// First reachable state (BFS order from state 0) failing `pred`.
pub fn invariant_core(succ: &[Vec<usize>], pred: &[bool]) -> Option<Lasso> {
    let parent = bfs_parents(succ, &[0], &|_| true);
    let order = bfs_order(succ);
    order.into_iter().find(|&s| !pred[s]).map(|s| Lasso { states: unwind(&parent, s), loop_back: None })
}

/// First reachable state without successors that is not terminal.
pub fn deadlock_core(succ: &[Vec<usize>], terminal: &[bool]) -> Option<Lasso> {
    let parent = bfs_parents(succ, &[0], &|_| true);
    bfs_order(succ)
        .into_iter()
        .find(|&s| succ[s].is_empty() && !terminal[s])
        .map(|s| Lasso { states: unwind(&parent, s), loop_back: None })
}

fn bfs_order(succ: &[Vec<usize>]) -> Vec<usize> {
    let mut seen = vec![false; succ.len()];
    let mut order = Vec::new();
    if succ.is_empty() {
        return order;
    }
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(s) = queue.pop_front() {
        order.push(s);
        for &t in &succ[s] {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    order
}

/// `AG(p -> AF q)` under maximal-path semantics: violated iff from some
/// reachable p-state a q-free path reaches a dead end or a q-free cycle.
pub fn leads_to_core(succ: &[Vec<usize>], p: &[bool], q: &[bool]) -> Option<Lasso> {
    let n = succ.len();
    let global = bfs_parents(succ, &[0], &|_| true);
    let starts: Vec<usize> = bfs_order(succ).into_iter().filter(|&s| p[s] && !q[s]).collect();
    if starts.is_empty() {
        return None;
    }
    let inner = bfs_parents(succ, &starts, &|s| !q[s]);
    let in_r: Vec<bool> = inner.iter().map(Option::is_some).collect();

    let link = |b: usize| -> Vec<usize> {
        let tail = unwind(&inner, b);
        let mut path = unwind(&global, tail[0]);
        path.extend_from_slice(&tail[1..]);
        path
    };

    // dead ends inside the q-free region, in BFS order of the region
    let region = region_order(succ, &starts, &in_r);
    if let Some(&b) = region.iter().find(|&&s| succ[s].is_empty()) {
        return Some(Lasso { states: link(b), loop_back: None });
    }

    // cycles inside the region
    let comp = tarjan(succ, &in_r);
    let mut size = vec![0usize; n];
    for c in comp.iter().flatten() {
        size[*c] += 1;
    }
    let cyclic = |s: usize| match comp[s] {
        Some(c) => size[c] > 1 || succ[s].contains(&s),
        None => false,
    };
    let b = region.iter().copied().find(|&s| cyclic(s))?;
    let mut path = link(b);
    let c = comp[b];
    // walk inside the component from b back to b
    let sources: Vec<usize> = succ[b].iter().copied().filter(|&t| comp[t] == c && t != b).collect();
    let back = bfs_parents(succ, &sources, &|s| comp[s] == c && s != b);
    let loop_index = path.len() - 1;
    if succ[b].contains(&b) {
        return Some(Lasso { states: path, loop_back: Some(loop_index) });
    }
    let pred_of_b = (0..n).find(|&s| back[s].is_some() && succ[s].contains(&b) && comp[s] == c)?;
    let cycle = unwind(&back, pred_of_b);
    path.extend(cycle);
    Some(Lasso { states: path, loop_back: Some(loop_index) })
}

fn region_order(succ: &[Vec<usize>], starts: &[usize], in_r: &[bool]) -> Vec<usize> {
    let mut seen = vec![false; succ.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for &s in starts {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        out.push(s);
        for &t in &succ[s] {
            if in_r[t] && !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    out
}

/// Iterative Tarjan SCC restricted to `mask`.
fn tarjan(succ: &[Vec<usize>], mask: &[bool]) -> Vec<Option<usize>> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![None; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if !mask[root] || index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < succ[v].len() {
                let w = succ[v][*i];
                *i += 1;
                if !mask[w] {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = Some(next_comp);
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

fn mask(net: &AutomatonNetwork, g: &StateGraph, e: &Expr) -> Result<Vec<bool>, AutomataError> {
    let c = Compiled::new(e, net)?;
    g.states.iter().map(|s| c.holds(s)).collect()
}

pub fn check(net: &AutomatonNetwork, g: &StateGraph, query: &CtlQuery) -> Result<Verdict, AutomataError> {
    let succ = g.adjacency();
    let lasso = match query {
        CtlQuery::DeadlockFree => deadlock_core(&succ, &g.terminal),
        CtlQuery::Invariant(pred) => invariant_core(&succ, &mask(net, g, pred)?),
        CtlQuery::LeadsTo(p, q) => leads_to_core(&succ, &mask(net, g, p)?, &mask(net, g, q)?),
    };
    Ok(match lasso {
        None => Verdict::Holds,
        Some(l) => {
            let mut steps: Vec<Fired> =
                l.states.windows(2).map(|w| g.label(w[0], w[1]).expect("trace follows graph edges")).collect();
            if let Some(i) = l.loop_back {
                let last = *l.states.last().expect("non-empty trace");
                steps.push(g.label(last, l.states[i]).expect("loop edge exists"));
            }
            Verdict::Violated(Trace { states: l.states, steps, loop_back: l.loop_back })
        }
    })
}

impl Trace {
    /// Re-executes the trace from the network's initial state and confirms
    /// that it is legal and exhibits a violation of `query`.
    pub fn replays(&self, net: &AutomatonNetwork, query: &CtlQuery) -> Result<bool, AutomataError> {
        let sem = Semantics::new(net)?;
        let mut concrete = vec![net.initial_state()];
        for &f in &self.steps {
            match sem.fire(concrete.last().expect("non-empty"), f)? {
                Some(next) => concrete.push(next),
                None => return Ok(false),
            }
        }
        if let Some(back) = self.loop_back {
            let closing = concrete.pop().expect("loop step");
            if concrete.get(back) != Some(&closing) {
                return Ok(false);
            }
        }
        if concrete.len() != self.states.len() {
            return Ok(false);
        }
        let last = concrete.last().expect("non-empty");
        let compile = |e: &Expr| Compiled::new(e, net);
        Ok(match query {
            CtlQuery::DeadlockFree => sem.successors(last)?.is_empty(),
            CtlQuery::Invariant(pred) => !compile(pred)?.holds(last)?,
            CtlQuery::LeadsTo(p, q) => {
                let (p, q) = (compile(p)?, compile(q)?);
                let ends = match self.loop_back {
                    Some(_) => true,
                    None => sem.successors(last)?.is_empty(),
                };
                // a p-state after which q never holds along the rest of the trace
                let mut found = false;
                for start in 0..concrete.len() {
                    if self.loop_back.is_some_and(|i| i < start) {
                        break;
                    }
                    if p.holds(&concrete[start])? && concrete[start..].iter().all(|s| !q.holds(s).unwrap_or(true)) {
                        found = true;
                        break;
                    }
                }
                ends && found
            }
        })
    }

    pub fn render(&self, net: &AutomatonNetwork, g: &StateGraph) -> String {
        let mut out = String::new();
        for (i, &s) in self.states.iter().enumerate() {
            if self.loop_back == Some(i) {
                out.push_str("  -- loop starts here --\n");
            }
            out.push_str(&format!("  {:>3}: {}\n", i, net.describe(&g.states[s])));
            if let Some(f) = self.steps.get(i) {
                out.push_str(&format!("       via {}\n", describe_fired(net, *f)));
            }
        }
        if let Some(i) = self.loop_back {
            out.push_str(&format!("  -- back to step {i} --\n"));
        } else {
            out.push_str("  -- no further progress --\n");
        }
        out
    }
}

pub(crate) fn describe_fired(net: &AutomatonNetwork, f: Fired) -> String {
    let edge = |a: usize, e: usize| {
        let aut = &net.automata[a];
        let ed = &aut.edges[e];
        format!("{}: {} -> {}", aut.name, aut.locations[ed.source], aut.locations[ed.target])
    };
    match f {
        Fired::Internal { automaton, edge: e } => edge(automaton, e),
        Fired::Sync { sender, receiver } => {
            let ch = net.automata[sender.0].edges[sender.1].sync.text();
            format!("{} | {} [{}]", edge(sender.0, sender.1), edge(receiver.0, receiver.1), ch.trim_end_matches('!'))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[usize]) -> Vec<bool> {
        let n = 6;
        (0..n).map(|i| xs.contains(&i)).collect()
    }

    #[test]
    fn q_equals_p_holds() {
        let succ = vec![vec![1], vec![0]];
        let p = vec![true, false];
        assert_eq!(leads_to_core(&succ, &p, &p), None);
    }

    #[test]
    fn cycle_avoiding_q_is_reported_as_lasso() {
        // 0 -> 1 -> 2 -> 1, 2 -> 3 ; p at 1, q at 3
        let succ = vec![vec![1], vec![2], vec![1, 3], vec![3], vec![], vec![]];
        let l = leads_to_core(&succ, &v(&[1]), &v(&[3])).unwrap();
        assert_eq!(l.states, vec![0, 1, 2]);
        assert_eq!(l.loop_back, Some(1));
    }

    #[test]
    fn dead_end_is_reported() {
        let succ = vec![vec![1, 2], vec![3], vec![], vec![3], vec![], vec![]];
        let l = leads_to_core(&succ, &v(&[0]), &v(&[3])).unwrap();
        assert_eq!(l.states, vec![0, 2]);
        assert_eq!(l.loop_back, None);
    }

    #[test]
    fn deadlock_and_invariant() {
        let succ = vec![vec![1], vec![2], vec![]];
        assert_eq!(deadlock_core(&succ, &[false, false, false]).unwrap().states, vec![0, 1, 2]);
        assert_eq!(deadlock_core(&succ, &[false, false, true]), None);
        assert_eq!(invariant_core(&succ, &[true, false, true]).unwrap().states, vec![0, 1]);
    }
}
