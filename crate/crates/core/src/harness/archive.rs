use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError, RunManifest, REPORT_FILE};
use crate::automata::SuiteReport;
use crate::digest::sha256_hex;
use crate::gsn::{parse_outline, render, Format, Stage};
use crate::mape::{Decision, EvidenceTable, Knowledge, LoopRecord};

pub const DECISIONS: &str = "decisions.log";
pub const TIMING: &str = "timing.csv";
pub const TRACE: &str = "trace.csv";
pub const MANIFEST: &str = "manifest.json";

/// One line of `decisions.log`. Wall-time measurements live in `timing.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLine {
    pub seq: usize,
    pub time: f64,
    pub event: String,
    pub triggered: bool,
    pub decision: String,
    pub reason: Option<String>,
    pub previous: String,
    pub target: Option<String>,
    pub applied: String,
    pub plan: Vec<String>,
    pub verified: usize,
    pub feasible: usize,
    /// Archive-relative path of the evidence table.
    pub evidence: Option<String>,
    pub evidence_digest: Option<String>,
    /// Archive-relative path stem of the argument files.
    pub argument: Option<String>,
    pub argument_version: Option<u64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub seq: usize,
    pub event: String,
    pub verified: usize,
    pub verify_ms: f64,
    pub reaction_ms: f64,
}

fn digest(text: &str) -> String {
    format!("sha256:{}", sha256_hex(text.as_bytes()))
}

fn evidence_csv(table: &EvidenceTable) -> String {
    table.to_csv().expect("in-memory csv write")
}

pub(super) fn decision_lines<C: std::fmt::Display>(records: &[LoopRecord<C>]) -> (Vec<DecisionLine>, Vec<TimingRow>) {
    let mut lines = Vec::new();
    let mut timing = Vec::new();
    for r in records {
        let (verified, feasible) = r.analysis.as_ref().map_or((0, 0), |a| (a.outcome.entries.len(), a.feasible_count()));
        let reason = match &r.decision {
            Decision::Failsafe { reason, .. } => Some(reason.to_string()),
            _ => None,
        };
        lines.push(DecisionLine {
            seq: r.seq,
            time: r.time,
            event: r.event.clone(),
            triggered: r.triggered,
            decision: r.decision.kind().to_string(),
            reason,
            previous: r.previous.to_string(),
            target: r.decision.target().map(|t| t.to_string()),
            applied: r.applied.to_string(),
            plan: r.plan.clone(),
            verified,
            feasible,
            evidence: r.evidence.as_ref().map(|_| format!("evidence/{}.csv", r.seq)),
            evidence_digest: r.evidence.as_ref().map(|t| digest(&evidence_csv(t))),
            argument: r.argument_version.map(|_| format!("arguments/{}", r.seq)),
            argument_version: r.argument_version,
            errors: r.errors.clone(),
        });
        timing.push(TimingRow {
            seq: r.seq,
            event: r.event.clone(),
            verified,
            verify_ms: r.analysis.as_ref().map_or(0.0, |a| a.outcome.elapsed.as_secs_f64() * 1e3),
            reaction_ms: r.reaction.as_secs_f64() * 1e3,
        });
    }
    (lines, timing)
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes the archive layout:
///
/// ```text
/// manifest.json  controller_report.txt  decisions.log  timing.csv  trace.csv
/// evidence/<seq>.csv
/// arguments/partial.{dot,txt}  arguments/<seq>.{dot,txt}
/// ```
///
/// Everything except `timing.csv` is a function of the manifest alone in
/// logical-clock mode.
pub fn write_archive<C: std::fmt::Display>(
    dir: &Path,
    manifest: &RunManifest,
    controller: &SuiteReport,
    k: &Knowledge<C>,
    records: &[LoopRecord<C>],
    trace_csv: &str,
) -> Result<(), HarnessError> {
    for sub in ["evidence", "arguments"] {
        let p = dir.join(sub);
        if p.is_dir() {
            fs::remove_dir_all(&p).map_err(|e| io_err(&p, e))?;
        }
        fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
    }
    let stored = RunManifest { out: None, ..manifest.clone() };
    write(&dir.join(MANIFEST), &(serde_json::to_string_pretty(&stored).expect("manifest serializes") + "\n"))?;
    write(&dir.join(REPORT_FILE), &controller.render())?;
    write(&dir.join("arguments/partial.dot"), &render(&k.partial, Format::Dot))?;
    write(&dir.join("arguments/partial.txt"), &render(&k.partial, Format::Outline))?;
    let mut log = String::new();
    let mut timing = String::from("seq,event,verified,verify_ms,reaction_ms\n");
    let (lines, rows) = decision_lines(records);
    for (line, row) in lines.iter().zip(&rows) {
        log.push_str(&serde_json::to_string(line).expect("decision serializes"));
        log.push('\n');
        let _ = writeln!(timing, "{},{},{},{:.3},{:.3}", row.seq, row.event, row.verified, row.verify_ms, row.reaction_ms);
    }
    for r in records {
        if let Some(t) = &r.evidence {
            write(&dir.join(format!("evidence/{}.csv", r.seq)), &evidence_csv(t))?;
        }
        if let Some(v) = r.argument_version {
            let arg = k.arguments.get(v).ok_or_else(|| HarnessError::Io(format!("argument version {v} missing from history")))?;
            write(&dir.join(format!("arguments/{}.dot", r.seq)), &render(arg, Format::Dot))?;
            write(&dir.join(format!("arguments/{}.txt", r.seq)), &render(arg, Format::Outline))?;
        }
    }
    write(&dir.join(DECISIONS), &log)?;
    write(&dir.join(TIMING), &timing)?;
    write(&dir.join(TRACE), trace_csv)?;
    Ok(())
}

pub fn read_decisions(dir: &Path) -> Result<Vec<DecisionLine>, HarnessError> {
    let path = dir.join(DECISIONS);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::CorruptArchive(format!("{}: {e}", path.display())))?;
    let lines: Vec<DecisionLine> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::CorruptArchive(format!("{DECISIONS} line {}: {e}", i + 1)))
        })
        .collect::<Result<_, _>>()?;
    if lines.is_empty() {
        return Err(HarnessError::CorruptArchive(format!("{DECISIONS} holds no decisions")));
    }
    Ok(lines)
}

fn read_timing(dir: &Path) -> Result<BTreeMap<usize, TimingRow>, HarnessError> {
    let path = dir.join(TIMING);
    let corrupt = |m: String| HarnessError::CorruptArchive(format!("{TIMING}: {m}"));
    let mut r = csv::Reader::from_path(&path).map_err(|e| corrupt(e.to_string()))?;
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| corrupt(e.to_string()))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| corrupt("short row".into()));
        let num = |i: usize| field(i)?.parse::<f64>().map_err(|_| corrupt("bad number".into()));
        let seq = field(0)?.parse::<usize>().map_err(|_| corrupt("bad seq".into()))?;
        out.insert(
            seq,
            TimingRow { seq, event: field(1)?.to_string(), verified: num(2)? as usize, verify_ms: num(3)?, reaction_ms: num(4)? },
        );
    }
    Ok(out)
}

/// Content of a checked archive.
#[derive(Debug, Clone)]
pub struct ArchiveSummary {
    pub decisions: Vec<DecisionLine>,
    pub timing: BTreeMap<usize, TimingRow>,
    pub controller_digest: String,
    pub arguments: usize,
}

impl ArchiveSummary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let count = |k: &str| self.decisions.iter().filter(|d| d.decision == k).count();
        let _ = writeln!(out, "controller evidence: {}", self.controller_digest);
        let _ = writeln!(
            out,
            "decisions: {} ({} adapt, {} failsafe, {} keep), arguments: {}",
            self.decisions.len(),
            count("adapt"),
            count("failsafe"),
            count("keep"),
            self.arguments
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:>4} {:>9} {:<6} {:<9} {:<36} {:>9} {:>10} {:<8}",
            "seq", "time", "event", "decision", "configuration", "feasible", "verify_ms", "argument"
        );
        for d in &self.decisions {
            let feasible = if d.verified > 0 { format!("{}/{}", d.feasible, d.verified) } else { "-".into() };
            let ms = self.timing.get(&d.seq).filter(|_| d.verified > 0).map_or("-".into(), |t| format!("{:.1}", t.verify_ms));
            let arg = d.argument_version.map_or("-".into(), |v| format!("v{v}"));
            let _ = writeln!(
                out,
                "{:>4} {:>9} {:<6} {:<9} {:<36} {:>9} {:>10} {:<8}",
                d.seq, d.time, d.event, d.decision, d.applied, feasible, ms, arg
            );
            if let Some(r) = &d.reason {
                let _ = writeln!(out, "       reason: {r}");
            }
            for e in &d.errors {
                let _ = writeln!(out, "       error: {e}");
            }
        }
        out
    }
}

/// Re-reads an archive and checks that every decision that changed the
/// configuration has an evidence table with the logged digest, a timing row
/// and a valid full argument whose context is the applied configuration and
/// whose evidence references all resolve.
pub fn check_archive(dir: &Path) -> Result<ArchiveSummary, HarnessError> {
    let corrupt = |m: String| HarnessError::CorruptArchive(m);
    let decisions = read_decisions(dir)?;
    let timing = read_timing(dir)?;
    let report_path = dir.join(REPORT_FILE);
    let report = fs::read_to_string(&report_path).map_err(|e| corrupt(format!("{}: {e}", report_path.display())))?;
    let controller_digest = digest(&report);
    let mut arguments = 0;
    for d in &decisions {
        let acted = d.decision != "keep" && d.target.as_deref() == Some(d.applied.as_str());
        if !timing.contains_key(&d.seq) {
            return Err(corrupt(format!("decision {} has no timing row", d.seq)));
        }
        let table = match (&d.evidence, &d.evidence_digest) {
            (Some(p), Some(want)) => {
                let text = fs::read_to_string(dir.join(p)).map_err(|e| corrupt(format!("{p}: {e}")))?;
                if &digest(&text) != want {
                    return Err(corrupt(format!("{p} does not match its logged digest")));
                }
                Some(EvidenceTable::from_csv(&text).map_err(|e| corrupt(format!("{p}: {e}")))?)
            }
            (None, None) if d.triggered => return Err(corrupt(format!("analysed decision {} has no evidence", d.seq))),
            (None, None) => None,
            _ => return Err(corrupt(format!("decision {} has an evidence path without digest or vice versa", d.seq))),
        };
        let Some(stem) = &d.argument else {
            if acted {
                return Err(corrupt(format!("decision {} changed the configuration but has no argument", d.seq)));
            }
            continue;
        };
        let txt = format!("{stem}.txt");
        let dot = dir.join(format!("{stem}.dot"));
        if !dot.is_file() {
            return Err(corrupt(format!("{} is missing", dot.display())));
        }
        let outline = fs::read_to_string(dir.join(&txt)).map_err(|e| corrupt(format!("{txt}: {e}")))?;
        let arg = parse_outline(&outline).map_err(|e| corrupt(format!("{txt}: {e}")))?;
        if arg.stage != Stage::Full || Some(arg.version) != d.argument_version {
            return Err(corrupt(format!("{txt} is not full argument version {:?}", d.argument_version)));
        }
        let report = arg.validate();
        if !report.is_valid() {
            return Err(corrupt(format!("{txt} does not validate: {report}")));
        }
        let context = arg.node("ReqsConfiguration").map(|n| n.text.clone()).unwrap_or_default();
        if !context.ends_with(&format!("configuration {}", d.applied)) {
            return Err(corrupt(format!("{txt} context `{context}` is not the applied configuration {}", d.applied)));
        }
        for (node, r) in arg.evidence_refs() {
            let resolved = r == controller_digest || table.as_ref().is_some_and(|t| t.resolve(r).is_some());
            if !resolved {
                return Err(corrupt(format!("{txt}: evidence of {node} does not resolve")));
            }
        }
        arguments += 1;
    }
    Ok(ArchiveSummary { decisions, timing, controller_digest, arguments })
}
