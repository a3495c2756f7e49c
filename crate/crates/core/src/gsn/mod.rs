//! Goal Structuring Notation arguments: typed nodes with `{placeholder}`
//! spans, staged instantiation of the built-in pattern, validation and
//! rendering to DOT or an indented text outline.

mod instantiate;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use instantiate::{
    instantiate_full, instantiate_partial, load_pattern, result_node_id, Assurance, DesignEvidence, EvidenceItem,
    RequirementSpec, RuntimeBinding, REQUIREMENT_STRATEGY,
};
pub use render::{parse_outline, render, Format};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GsnError {
    #[error("design evidence has no verdict for `{0}`")]
    MissingDesignEvidence(String),
    #[error("design evidence reports `{0}` as violated")]
    DesignPropertyViolated(String),
    #[error("runtime evidence has no row for requirement `{0}`")]
    EvidenceMismatch(String),
    #[error("expected a {expected} argument, got {found}")]
    WrongStage { expected: Stage, found: Stage },
    #[error("unknown render format `{0}`")]
    UnknownFormat(String),
    #[error("outline line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("malformed pattern: {0}")]
    Pattern(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Goal,
    Strategy,
    Solution,
    Context,
    Assumption,
    Justification,
    AwayGoal,
}

impl NodeKind {
    pub const ALL: [NodeKind; 7] = [
        NodeKind::Goal,
        NodeKind::Strategy,
        NodeKind::Solution,
        NodeKind::Context,
        NodeKind::Assumption,
        NodeKind::Justification,
        NodeKind::AwayGoal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Goal => "Goal",
            NodeKind::Strategy => "Strategy",
            NodeKind::Solution => "Solution",
            NodeKind::Context => "Context",
            NodeKind::Assumption => "Assumption",
            NodeKind::Justification => "Justification",
            NodeKind::AwayGoal => "AwayGoal",
        }
    }

    pub fn from_name(s: &str) -> Option<NodeKind> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Kinds that can be supported by other nodes. Away goals count: their
    /// supporting structure lives in another module but is shown inline.
    pub fn can_be_supported(self) -> bool {
        matches!(self, NodeKind::Goal | NodeKind::Strategy | NodeKind::AwayGoal)
    }

    pub fn is_contextual(self) -> bool {
        matches!(self, NodeKind::Context | NodeKind::Assumption | NodeKind::Justification)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pattern,
    Partial,
    Full,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Pattern => "pattern",
            Stage::Partial => "partial",
            Stage::Full => "full",
        })
    }
}

impl Stage {
    pub fn parse(s: &str) -> Option<Stage> {
        [Stage::Pattern, Stage::Partial, Stage::Full].into_iter().find(|x| x.to_string() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    #[default]
    SupportedBy,
    InContextOf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplicity {
    #[default]
    One,
    Many,
    Optional,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GsnEdge {
    pub kind: EdgeKind,
    pub parent: String,
    pub child: String,
    pub multiplicity: Multiplicity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GsnNode {
    pub id: String,
    pub kind: NodeKind,
    /// Template text; `{name}` spans are resolved through `bindings`.
    pub text: String,
    pub bindings: BTreeMap<String, String>,
    pub uninstantiated: bool,
    pub undeveloped: bool,
    pub evidence_ref: Option<String>,
}

/// Names of the `{name}` spans in `text`, in order of first appearance.
pub fn placeholders(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else { break };
        let name = &after[..close];
        if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && !out.iter().any(|n| n == name) {
            out.push(name.to_string());
        }
        rest = &after[close + 1..];
    }
    out
}

/// Replaces each `{name}` span for which `lookup` returns a value.
pub fn substitute(text: &str, lookup: &dyn Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                match lookup(&after[..close]) {
                    Some(v) => out.push_str(&v),
                    None => out.push_str(&rest[open..open + close + 2]),
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

impl GsnNode {
    pub fn new(id: &str, kind: NodeKind, text: &str) -> Self {
        let mut n = GsnNode {
            id: id.to_string(),
            kind,
            text: text.to_string(),
            bindings: BTreeMap::new(),
            uninstantiated: false,
            undeveloped: false,
            evidence_ref: None,
        };
        n.refresh();
        n
    }

    pub fn unresolved(&self) -> Vec<String> {
        placeholders(&self.text).into_iter().filter(|p| !self.bindings.contains_key(p)).collect()
    }

    /// Text with all bound placeholders substituted.
    pub fn rendered_text(&self) -> String {
        substitute(&self.text, &|name| self.bindings.get(name).cloned())
    }

    pub fn bind(&mut self, name: &str, value: &str) {
        if placeholders(&self.text).iter().any(|p| p == name) {
            self.bindings.insert(name.to_string(), value.to_string());
            self.refresh();
        }
    }

    fn refresh(&mut self) {
        self.uninstantiated = !self.unresolved().is_empty();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsnArgument {
    pub system: String,
    pub stage: Stage,
    pub version: u64,
    /// Logical time (seconds) at which this version was produced.
    pub timestamp: f64,
    pub requirements: Vec<RequirementSpec>,
    pub nodes: Vec<GsnNode>,
    pub edges: Vec<GsnEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GsnViolation {
    DuplicateNode(String),
    DanglingEdge { parent: String, child: String },
    Cycle(String),
    IllegalSupportParent(String),
    IllegalContextChild(String),
    ContextSupports(String),
    FlagMismatch(String),
    UndevelopedNonGoal(String),
    EvidenceOnNonSolution(String),
    MissingEvidence(String),
    Uninstantiated(String),
    UndevelopedRequirementGoal(String),
    NoRoot,
}

impl fmt::Display for GsnViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GsnViolation::DuplicateNode(id) => write!(f, "node {id} is declared twice"),
            GsnViolation::DanglingEdge { parent, child } => write!(f, "edge {parent} -> {child} references an unknown node"),
            GsnViolation::Cycle(id) => write!(f, "node {id} lies on a cycle"),
            GsnViolation::IllegalSupportParent(id) => write!(f, "{id} cannot be supported by other nodes"),
            GsnViolation::IllegalContextChild(id) => {
                write!(f, "{id} is used as context but is not a context, assumption or justification")
            }
            GsnViolation::ContextSupports(id) => write!(f, "contextual node {id} is used as support"),
            GsnViolation::FlagMismatch(id) => write!(f, "uninstantiated flag of {id} disagrees with its placeholders"),
            GsnViolation::UndevelopedNonGoal(id) => write!(f, "{id} is marked undeveloped but is not a goal or strategy"),
            GsnViolation::EvidenceOnNonSolution(id) => write!(f, "{id} carries evidence but is not a solution"),
            GsnViolation::MissingEvidence(id) => write!(f, "solution {id} has no evidence reference"),
            GsnViolation::Uninstantiated(id) => write!(f, "{id} is still uninstantiated"),
            GsnViolation::UndevelopedRequirementGoal(id) => write!(f, "requirement goal {id} is undeveloped"),
            GsnViolation::NoRoot => write!(f, "argument has no root goal"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GsnReport {
    pub violations: Vec<GsnViolation>,
}

impl GsnReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for GsnReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

impl GsnArgument {
    pub fn node(&self, id: &str) -> Option<&GsnNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut GsnNode> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn children<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a GsnEdge> + 'a {
        self.edges.iter().filter(move |e| e.parent == id)
    }

    /// Nodes without parents, in declaration order.
    pub fn roots(&self) -> Vec<&GsnNode> {
        let children: BTreeSet<&str> = self.edges.iter().map(|e| e.child.as_str()).collect();
        self.nodes.iter().filter(|n| !children.contains(n.id.as_str())).collect()
    }

    pub fn uninstantiated(&self) -> Vec<&GsnNode> {
        self.nodes.iter().filter(|n| n.uninstantiated).collect()
    }

    /// Binds `name` in every node whose text mentions it.
    pub fn bind_all(&mut self, name: &str, value: &str) {
        for n in &mut self.nodes {
            n.bind(name, value);
        }
    }

    /// Binding of the configuration placeholder, if any node has one.
    pub fn context_configuration(&self) -> Option<&str> {
        self.node("ReqsConfiguration").and_then(|n| n.bindings.get("config")).map(String::as_str)
    }

    /// Ids reachable from `root` through SupportedBy edges, excluding `root`.
    pub fn supported_descendants(&self, root: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![root.to_string()];
        while let Some(id) = stack.pop() {
            for e in self.children(&id) {
                if e.kind == EdgeKind::SupportedBy && seen.insert(e.child.clone()) {
                    stack.push(e.child.clone());
                }
            }
        }
        seen
    }

    pub fn evidence_refs(&self) -> Vec<(&str, &str)> {
        self.nodes.iter().filter_map(|n| n.evidence_ref.as_deref().map(|r| (n.id.as_str(), r))).collect()
    }

    pub fn validate(&self) -> GsnReport {
        let mut v = Vec::new();
        let mut ids: BTreeMap<&str, &GsnNode> = BTreeMap::new();
        for n in &self.nodes {
            if ids.insert(n.id.as_str(), n).is_some() {
                v.push(GsnViolation::DuplicateNode(n.id.clone()));
            }
            if n.uninstantiated != !n.unresolved().is_empty() {
                v.push(GsnViolation::FlagMismatch(n.id.clone()));
            }
            if n.undeveloped && !matches!(n.kind, NodeKind::Goal | NodeKind::Strategy) {
                v.push(GsnViolation::UndevelopedNonGoal(n.id.clone()));
            }
            if n.evidence_ref.is_some() && n.kind != NodeKind::Solution {
                v.push(GsnViolation::EvidenceOnNonSolution(n.id.clone()));
            }
        }
        let mut illegal_parents = BTreeSet::new();
        for e in &self.edges {
            let (Some(p), Some(c)) = (ids.get(e.parent.as_str()), ids.get(e.child.as_str())) else {
                v.push(GsnViolation::DanglingEdge { parent: e.parent.clone(), child: e.child.clone() });
                continue;
            };
            match e.kind {
                EdgeKind::SupportedBy => {
                    if !p.kind.can_be_supported() && illegal_parents.insert(p.id.clone()) {
                        v.push(GsnViolation::IllegalSupportParent(p.id.clone()));
                    }
                    if c.kind.is_contextual() {
                        v.push(GsnViolation::ContextSupports(c.id.clone()));
                    }
                }
                EdgeKind::InContextOf => {
                    if !c.kind.is_contextual() {
                        v.push(GsnViolation::IllegalContextChild(c.id.clone()));
                    }
                }
            }
        }
        for id in self.cycle_members() {
            v.push(GsnViolation::Cycle(id));
        }
        if !self.nodes.is_empty() && !self.roots().iter().any(|n| n.kind == NodeKind::Goal) {
            v.push(GsnViolation::NoRoot);
        }
        if self.stage == Stage::Full {
            let branch = self.supported_descendants(REQUIREMENT_STRATEGY);
            for n in &self.nodes {
                if n.uninstantiated {
                    v.push(GsnViolation::Uninstantiated(n.id.clone()));
                }
                if n.kind == NodeKind::Solution && n.evidence_ref.is_none() {
                    v.push(GsnViolation::MissingEvidence(n.id.clone()));
                }
                if n.undeveloped && n.kind == NodeKind::Goal && branch.contains(&n.id) && self.is_requirement_node(&n.id) {
                    v.push(GsnViolation::UndevelopedRequirementGoal(n.id.clone()));
                }
            }
        }
        GsnReport { violations: v }
    }

    fn is_requirement_node(&self, id: &str) -> bool {
        self.requirements.iter().any(|r| id.starts_with(&r.id))
    }

    /// Nodes that lie on a directed cycle (either edge kind).
    fn cycle_members(&self) -> Vec<String> {
        let index: BTreeMap<&str, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if let (Some(&p), Some(&c)) = (index.get(e.parent.as_str()), index.get(e.child.as_str())) {
                adj[p].push(c);
            }
        }
        // Kahn's algorithm: whatever cannot be peeled off lies on or behind a cycle;
        // report only the nodes that can reach themselves.
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for succ in &adj {
            for &c in succ {
                indeg[c] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut removed = vec![false; n];
        while let Some(i) = queue.pop() {
            removed[i] = true;
            for &c in &adj[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        let reaches_self = |start: usize| {
            let mut seen = vec![false; n];
            let mut stack = adj[start].clone();
            while let Some(x) = stack.pop() {
                if x == start {
                    return true;
                }
                if !seen[x] {
                    seen[x] = true;
                    stack.extend(adj[x].iter().copied());
                }
            }
            false
        };
        (0..n).filter(|&i| !removed[i] && reaches_self(i)).map(|i| self.nodes[i].id.clone()).collect()
    }
}

/// Append-only store of argument versions.
#[derive(Debug, Clone, Default)]
pub struct ArgumentHistory {
    versions: Vec<GsnArgument>,
}

impl ArgumentHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_version(&self) -> u64 {
        self.versions.len() as u64 + 1
    }

    /// Stores `arg` under the next version id and returns that id.
    pub fn push(&mut self, mut arg: GsnArgument) -> u64 {
        let v = self.next_version();
        arg.version = v;
        self.versions.push(arg);
        v
    }

    pub fn get(&self, version: u64) -> Option<&GsnArgument> {
        version.checked_sub(1).and_then(|i| self.versions.get(i as usize))
    }

    pub fn latest(&self) -> Option<&GsnArgument> {
        self.versions.last()
    }

    pub fn len(&self) -> usize {
        self.versions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GsnArgument> {
        self.versions.iter()
    }
}
