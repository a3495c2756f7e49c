use std::collections::BTreeSet;
use std::fmt::Write;
use std::str::FromStr;

use super::{Assurance, EdgeKind, GsnArgument, GsnEdge, GsnError, GsnNode, Multiplicity, NodeKind, RequirementSpec, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Dot,
    Outline,
}

impl FromStr for Format {
    type Err = GsnError;

    fn from_str(s: &str) -> Result<Self, GsnError> {
        match s {
            "dot" => Ok(Format::Dot),
            "text" | "outline" | "text-outline" => Ok(Format::Outline),
            other => Err(GsnError::UnknownFormat(other.to_string())),
        }
    }
}

pub fn render(arg: &GsnArgument, format: Format) -> String {
    match format {
        Format::Dot => render_dot(arg),
        Format::Outline => render_outline(arg),
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn wrap(text: &str, width: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        if !cur.is_empty() && cur.len() + 1 + word.len() > width {
            lines.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(word);
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

fn node_attributes(n: &GsnNode) -> String {
    let (shape, extra) = match n.kind {
        NodeKind::Goal => ("box", ""),
        NodeKind::Strategy => ("parallelogram", ""),
        NodeKind::Solution => ("circle", ""),
        NodeKind::Context => ("box", "rounded"),
        NodeKind::Assumption => ("ellipse", ""),
        NodeKind::Justification => ("ellipse", ""),
        NodeKind::AwayGoal => ("tab", ""),
    };
    let mut styles: Vec<&str> = Vec::new();
    if !extra.is_empty() {
        styles.push(extra);
    }
    if n.uninstantiated {
        styles.push("dashed");
    } else if !n.bindings.is_empty() || n.evidence_ref.is_some() {
        styles.push("filled");
    }
    let mut label = vec![n.id.clone()];
    label.extend(wrap(&n.rendered_text(), 40));
    if n.uninstantiated {
        label.push("(uninstantiated)".into());
    }
    if n.undeveloped {
        label.push("(undeveloped)".into());
    }
    let label = label.iter().map(|l| dot_escape(l)).collect::<Vec<_>>().join("\\n");
    let mut attrs = format!("shape={shape}, label=\"{label}\"");
    if !styles.is_empty() {
        let _ = write!(attrs, ", style=\"{}\"", styles.join(","));
    }
    if styles.contains(&"filled") {
        attrs.push_str(", fillcolor=\"#dddddd\"");
    }
    match n.kind {
        NodeKind::Assumption => attrs.push_str(", xlabel=\"A\""),
        NodeKind::Justification => attrs.push_str(", xlabel=\"J\""),
        _ => {}
    }
    attrs
}

fn render_dot(arg: &GsnArgument) -> String {
    let mut out = String::new();
    let title = if arg.system.is_empty() { "pattern".to_string() } else { arg.system.clone() };
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(&title));
    let _ = writeln!(
        out,
        "  graph [rankdir=TB, label=\"{} assurance argument ({}, version {})\"];",
        dot_escape(&title),
        arg.stage,
        arg.version
    );
    let _ = writeln!(out, "  node [fontname=\"Helvetica\", fontsize=10];");
    for n in &arg.nodes {
        let _ = writeln!(out, "  \"{}\" [{}];", dot_escape(&n.id), node_attributes(n));
    }
    for e in &arg.edges {
        let head = match e.kind {
            EdgeKind::SupportedBy => "normal",
            EdgeKind::InContextOf => "empty",
        };
        let mut attrs = format!("arrowhead={head}");
        match e.multiplicity {
            Multiplicity::One => {}
            Multiplicity::Many => attrs.push_str(", label=\"many\", arrowtail=dot, dir=both"),
            Multiplicity::Optional => attrs.push_str(", label=\"optional\", arrowtail=odot, dir=both"),
        }
        let _ = writeln!(out, "  \"{}\" -> \"{}\" [{}];", dot_escape(&e.parent), dot_escape(&e.child), attrs);
    }
    out.push_str("}\n");
    out
}

fn edge_prefix(e: &GsnEdge) -> String {
    let mut p = String::new();
    if e.kind == EdgeKind::InContextOf {
        p.push_str("[ctx] ");
    }
    match e.multiplicity {
        Multiplicity::One => {}
        Multiplicity::Many => p.push_str("[many] "),
        Multiplicity::Optional => p.push_str("[opt] "),
    }
    p
}

fn node_line(n: &GsnNode) -> String {
    let mut s = format!("{} {}", n.kind, n.id);
    if n.undeveloped {
        s.push_str(" [undeveloped]");
    }
    if n.uninstantiated {
        s.push_str(" [uninstantiated]");
    }
    if let Some(r) = &n.evidence_ref {
        let _ = write!(s, " [evidence={r}]");
    }
    let _ = write!(s, ": {}", n.rendered_text());
    s
}

fn render_outline(arg: &GsnArgument) -> String {
    let mut out = String::new();
    let _ =
        writeln!(out, "argument stage={} version={} timestamp={} system={}", arg.stage, arg.version, arg.timestamp, arg.system);
    for r in &arg.requirements {
        let a = match r.assurance {
            Assurance::Runtime => "runtime",
            Assurance::DesignTime => "design",
        };
        let _ = writeln!(out, "requirement {} {}: {}", r.id, a, r.text);
    }
    let mut printed = BTreeSet::new();
    for root in arg.roots() {
        outline_node(arg, root, 0, None, &mut printed, &mut out);
    }
    // Anything unreachable from a root (only possible in a cyclic graph).
    for n in &arg.nodes {
        if !printed.contains(&n.id) {
            outline_node(arg, n, 0, None, &mut printed, &mut out);
        }
    }
    out
}

fn outline_node(
    arg: &GsnArgument,
    n: &GsnNode,
    depth: usize,
    via: Option<&GsnEdge>,
    printed: &mut BTreeSet<String>,
    out: &mut String,
) {
    let indent = "  ".repeat(depth);
    let prefix = via.map(edge_prefix).unwrap_or_default();
    if !printed.insert(n.id.clone()) {
        let _ = writeln!(out, "{indent}{prefix}@{}", n.id);
        return;
    }
    let _ = writeln!(out, "{indent}{prefix}{}", node_line(n));
    for e in arg.children(&n.id) {
        if let Some(c) = arg.node(&e.child) {
            outline_node(arg, c, depth + 1, Some(e), printed, out);
        }
    }
}

/// Parses the text outline back into an argument. Node texts come back in
/// rendered form, so bound values are no longer distinguishable from the
/// template; ids, kinds, flags, evidence references and edges are preserved.
pub fn parse_outline(text: &str) -> Result<GsnArgument, GsnError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let err = |line: usize, msg: &str| GsnError::Parse { line: line + 1, msg: msg.to_string() };
    let (hl, header) = lines.next().ok_or_else(|| err(0, "empty outline"))?;
    let rest = header.strip_prefix("argument ").ok_or_else(|| err(hl, "expected `argument` header"))?;
    let (fields, system) = rest.split_once("system=").ok_or_else(|| err(hl, "missing system"))?;
    let mut arg = GsnArgument {
        system: system.to_string(),
        stage: Stage::Pattern,
        version: 0,
        timestamp: 0.0,
        requirements: Vec::new(),
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    for f in fields.split_whitespace() {
        let (k, v) = f.split_once('=').ok_or_else(|| err(hl, "bad header field"))?;
        match k {
            "stage" => arg.stage = Stage::parse(v).ok_or_else(|| err(hl, "unknown stage"))?,
            "version" => arg.version = v.parse().map_err(|_| err(hl, "bad version"))?,
            "timestamp" => arg.timestamp = v.parse().map_err(|_| err(hl, "bad timestamp"))?,
            _ => return Err(err(hl, "unknown header field")),
        }
    }
    let mut stack: Vec<String> = Vec::new();
    for (ln, raw) in lines {
        if let Some(r) = raw.strip_prefix("requirement ") {
            let (head, text) = r.split_once(": ").ok_or_else(|| err(ln, "bad requirement"))?;
            let (id, a) = head.split_once(' ').ok_or_else(|| err(ln, "bad requirement"))?;
            let assurance = match a {
                "runtime" => Assurance::Runtime,
                "design" => Assurance::DesignTime,
                _ => return Err(err(ln, "unknown assurance kind")),
            };
            arg.requirements.push(RequirementSpec { id: id.into(), text: text.into(), assurance });
            continue;
        }
        let trimmed = raw.trim_start_matches(' ');
        let indent = raw.len() - trimmed.len();
        if indent % 2 != 0 {
            return Err(err(ln, "indentation must be a multiple of two spaces"));
        }
        let depth = indent / 2;
        if depth > stack.len() {
            return Err(err(ln, "indentation skips a level"));
        }
        stack.truncate(depth);
        let mut body = trimmed;
        let mut kind = EdgeKind::SupportedBy;
        let mut multiplicity = Multiplicity::One;
        if let Some(b) = body.strip_prefix("[ctx] ") {
            kind = EdgeKind::InContextOf;
            body = b;
        }
        if let Some(b) = body.strip_prefix("[many] ") {
            multiplicity = Multiplicity::Many;
            body = b;
        } else if let Some(b) = body.strip_prefix("[opt] ") {
            multiplicity = Multiplicity::Optional;
            body = b;
        }
        let id = if let Some(r) = body.strip_prefix('@') {
            r.trim().to_string()
        } else {
            let node = parse_node_line(body).map_err(|m| err(ln, &m))?;
            let id = node.id.clone();
            arg.nodes.push(node);
            id
        };
        if let Some(parent) = stack.last() {
            arg.edges.push(GsnEdge { kind, parent: parent.clone(), child: id.clone(), multiplicity });
        } else if kind != EdgeKind::SupportedBy || multiplicity != Multiplicity::One {
            return Err(err(ln, "top-level node cannot carry edge markers"));
        }
        stack.push(id);
    }
    Ok(arg)
}

fn parse_node_line(body: &str) -> Result<GsnNode, String> {
    let (head, text) = body.split_once(": ").ok_or("node line needs `: text`")?;
    let mut parts = head.split(' ');
    let kind = parts.next().and_then(NodeKind::from_name).ok_or("unknown node kind")?;
    let id = parts.next().ok_or("missing node id")?;
    let mut node = GsnNode::new(id, kind, text);
    node.uninstantiated = false;
    for flag in parts {
        match flag {
            "[undeveloped]" => node.undeveloped = true,
            "[uninstantiated]" => node.uninstantiated = true,
            f => {
                let r = f
                    .strip_prefix("[evidence=")
                    .and_then(|x| x.strip_suffix(']'))
                    .ok_or_else(|| format!("unknown flag `{f}`"))?;
                node.evidence_ref = Some(r.to_string());
            }
        }
    }
    Ok(node)
}
