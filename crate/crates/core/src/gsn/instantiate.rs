use std::collections::BTreeMap;

use serde::Deserialize;

use super::{EdgeKind, GsnArgument, GsnEdge, GsnError, GsnNode, Multiplicity, NodeKind, Stage};
use crate::automata::SuiteReport;
use crate::digest::sha256_hex;

/// Strategy node under which one branch per requirement is developed.
pub const REQUIREMENT_STRATEGY: &str = "ReqsArgument";
const REQ_MARK: &str = "{Rx}";
const GENERIC_PROPERTIES: [&str; 9] = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9"];

const PATTERN_TEXT: &str = include_str!("../../data/gsn_pattern.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assurance {
    /// Established at run time, per configuration, by the verifier.
    Runtime,
    /// Established once at design time by verifying the controller.
    DesignTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequirementSpec {
    pub id: String,
    pub text: String,
    pub assurance: Assurance,
}

impl RequirementSpec {
    pub fn runtime(id: &str, text: &str) -> Self {
        RequirementSpec { id: id.into(), text: text.into(), assurance: Assurance::Runtime }
    }

    pub fn design_time(id: &str, text: &str) -> Self {
        RequirementSpec { id: id.into(), text: text.into(), assurance: Assurance::DesignTime }
    }
}

/// Verdicts produced by the controller verifier, identified by the digest
/// of the rendered report.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignEvidence {
    pub report_digest: String,
    pub verdicts: BTreeMap<String, bool>,
}

impl DesignEvidence {
    pub fn from_report(report: &SuiteReport) -> Self {
        DesignEvidence {
            report_digest: format!("sha256:{}", sha256_hex(report.render().as_bytes())),
            verdicts: report.verdicts.iter().map(|v| (v.id.clone(), v.holds)).collect(),
        }
    }

    fn require(&self, id: &str) -> Result<(), GsnError> {
        match self.verdicts.get(id) {
            None => Err(GsnError::MissingDesignEvidence(id.to_string())),
            Some(false) => Err(GsnError::DesignPropertyViolated(id.to_string())),
            Some(true) => Ok(()),
        }
    }
}

/// One piece of runtime evidence for a requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceItem {
    pub requirement: String,
    /// Content digest of the evidence row (`sha256:<hex>`).
    pub digest: String,
    pub summary: String,
}

/// What a decision contributes to the argument.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeBinding {
    pub config: String,
    pub evidence: Vec<EvidenceItem>,
    pub timestamp: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternNode {
    id: String,
    kind: NodeKind,
    text: String,
    #[serde(default)]
    undeveloped: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternEdge {
    parent: String,
    child: String,
    #[serde(default)]
    kind: EdgeKind,
    #[serde(default)]
    multiplicity: Multiplicity,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternFile {
    nodes: Vec<PatternNode>,
    edges: Vec<PatternEdge>,
}

pub fn parse_pattern(text: &str) -> Result<GsnArgument, GsnError> {
    let file: PatternFile = toml::from_str(text).map_err(|e| GsnError::Pattern(e.to_string()))?;
    let nodes = file
        .nodes
        .into_iter()
        .map(|n| {
            let mut g = GsnNode::new(&n.id, n.kind, &n.text);
            g.undeveloped = n.undeveloped;
            g
        })
        .collect();
    let edges = file
        .edges
        .into_iter()
        .map(|e| GsnEdge { kind: e.kind, parent: e.parent, child: e.child, multiplicity: e.multiplicity })
        .collect();
    Ok(GsnArgument {
        system: String::new(),
        stage: Stage::Pattern,
        version: 0,
        timestamp: 0.0,
        requirements: Vec::new(),
        nodes,
        edges,
    })
}

/// The built-in argument pattern shipped with the crate.
pub fn load_pattern() -> GsnArgument {
    parse_pattern(PATTERN_TEXT).expect("shipped pattern parses")
}

fn scope_text(req: &RequirementSpec) -> &'static str {
    match req.assurance {
        Assurance::Runtime => "for configuration {config} by runtime quantitative verification",
        Assurance::DesignTime => "for every configuration by model checking the controller",
    }
}

fn expand_requirements(pattern: &GsnArgument, reqs: &[RequirementSpec]) -> (Vec<GsnNode>, Vec<GsnEdge>) {
    let mut nodes = Vec::new();
    for n in &pattern.nodes {
        if !n.id.contains(REQ_MARK) {
            nodes.push(n.clone());
            continue;
        }
        for r in reqs {
            let text = n.text.replace("{Rx_scope}", scope_text(r)).replace("{Rx_text}", &r.text).replace(REQ_MARK, &r.id);
            let mut g = GsnNode::new(&n.id.replace(REQ_MARK, &r.id), n.kind, &text);
            g.undeveloped = n.undeveloped;
            nodes.push(g);
        }
    }
    let mut edges = Vec::new();
    for e in &pattern.edges {
        if !e.parent.contains(REQ_MARK) && !e.child.contains(REQ_MARK) {
            edges.push(e.clone());
            continue;
        }
        for r in reqs {
            edges.push(GsnEdge {
                kind: e.kind,
                parent: e.parent.replace(REQ_MARK, &r.id),
                child: e.child.replace(REQ_MARK, &r.id),
                multiplicity: Multiplicity::One,
            });
        }
    }
    (nodes, edges)
}

pub fn result_node_id(requirement: &str) -> String {
    format!("{requirement}Result")
}

/// Expands the pattern for `requirements`, binds the system-level
/// placeholders and the configuration the system is deployed in, and attaches
/// the design-time evidence. Runtime requirement results stay open.
pub fn instantiate_partial(
    pattern: &GsnArgument,
    system: &str,
    requirements: &[RequirementSpec],
    design: &DesignEvidence,
    deployment_config: &str,
) -> Result<GsnArgument, GsnError> {
    if pattern.stage != Stage::Pattern {
        return Err(GsnError::WrongStage { expected: Stage::Pattern, found: pattern.stage });
    }
    for p in GENERIC_PROPERTIES {
        design.require(p)?;
    }
    for r in requirements.iter().filter(|r| r.assurance == Assurance::DesignTime) {
        design.require(&r.id)?;
    }
    let (nodes, edges) = expand_requirements(pattern, requirements);
    let mut arg = GsnArgument {
        system: system.to_string(),
        stage: Stage::Partial,
        version: 0,
        timestamp: 0.0,
        requirements: requirements.to_vec(),
        nodes,
        edges,
    };
    let ids: Vec<&str> = requirements.iter().map(|r| r.id.as_str()).collect();
    arg.bind_all("system", system);
    arg.bind_all("requirements", &ids.join(", "));
    arg.bind_all("config", deployment_config);
    let passed = GENERIC_PROPERTIES.len();
    arg.bind_all(
        "controller_result",
        &format!("{passed}/{passed} generic properties hold (report {})", short(&design.report_digest)),
    );
    if let Some(n) = arg.node_mut("ControllerResult") {
        n.evidence_ref = Some(design.report_digest.clone());
    }
    for r in requirements.iter().filter(|r| r.assurance == Assurance::DesignTime) {
        if let Some(n) = arg.node_mut(&result_node_id(&r.id)) {
            n.bind("result", &format!("{} holds in the controller verification report {}", r.id, short(&design.report_digest)));
            n.evidence_ref = Some(design.report_digest.clone());
        }
    }
    Ok(arg)
}

/// Binds the configuration chosen by a decision and its runtime evidence.
/// The version id is assigned when the result is stored in a history.
pub fn instantiate_full(partial: &GsnArgument, binding: &RuntimeBinding) -> Result<GsnArgument, GsnError> {
    if partial.stage != Stage::Partial {
        return Err(GsnError::WrongStage { expected: Stage::Partial, found: partial.stage });
    }
    let mut arg = partial.clone();
    arg.stage = Stage::Full;
    arg.timestamp = binding.timestamp;
    arg.bind_all("config", &binding.config);
    for r in partial.requirements.iter().filter(|r| r.assurance == Assurance::Runtime) {
        let item =
            binding.evidence.iter().find(|e| e.requirement == r.id).ok_or_else(|| GsnError::EvidenceMismatch(r.id.clone()))?;
        if let Some(n) = arg.node_mut(&result_node_id(&r.id)) {
            n.bind("result", &item.summary);
            n.evidence_ref = Some(item.digest.clone());
        }
    }
    Ok(arg)
}

fn short(digest: &str) -> &str {
    let hex = digest.strip_prefix("sha256:").unwrap_or(digest);
    &hex[..hex.len().min(12)]
}
