use std::fmt::Write;
use std::time::{Duration, Instant};

use super::{check, compose_and_explore, AutomataError, AutomatonNetwork, CtlQuery, NamedQuery, Trace, Verdict};

/// The nine application-independent controller properties.
pub fn generic_properties(net: &AutomatonNetwork) -> Result<Vec<NamedQuery>, AutomataError> {
    let lt = |id: &str, d: &str, p: &str, q: &str| -> Result<NamedQuery, AutomataError> {
        Ok(NamedQuery { id: id.into(), description: d.into(), query: CtlQuery::leads_to(p, q)? })
    };
    let differs = if net.config_pairs.is_empty() {
        "false".to_string()
    } else {
        net.config_pairs.iter().map(|(c, n)| format!("{c} != {n}")).collect::<Vec<_>>().join(" || ")
    };
    Ok(vec![
        NamedQuery { id: "P1".into(), description: "the controller is deadlock free".into(), query: CtlQuery::DeadlockFree },
        lt(
            "P2",
            "whenever analysis is required, the analyzer eventually carries it out",
            "Monitor.StartAnalysis",
            "Analyzer.Analyse",
        )?,
        lt(
            "P3",
            "whenever requirements are violated, a reconfiguration plan is eventually assembled",
            "Analyzer.Adapt",
            "Planner.PlanCreated",
        )?,
        lt(
            "P4",
            "whenever a plan is assembled, the executor eventually implements it",
            "Planner.PlanCreated",
            "Executor.PlanExecuted",
        )?,
        lt(
            "P5",
            "whenever the monitor starts processing sensor data, it eventually finishes",
            "Monitor.ProcessSensorData",
            "Monitor.Finished",
        )?,
        lt(
            "P6",
            "whenever the analyzer starts analysing, it eventually finishes",
            "Analyzer.Analyse",
            "Analyzer.AnalysisFinished",
        )?,
        lt("P7", "whenever the planner starts planning, a plan is eventually created", "Planner.Plan", "Planner.PlanCreated")?,
        lt(
            "P8",
            "whenever the executor starts executing a plan, the plan is eventually executed",
            "Executor.Execute",
            "Executor.PlanExecuted",
        )?,
        NamedQuery {
            id: "P9".into(),
            description: "whenever adaptation is required, the current and the new configuration differ".into(),
            query: CtlQuery::invariant(&format!("!Analyzer.Adapt || ({differs})"))?,
        },
    ])
}

#[derive(Debug, Clone)]
pub struct PropertyVerdict {
    pub id: String,
    pub description: String,
    pub query: String,
    pub holds: bool,
    pub trace: Option<Trace>,
    pub trace_text: Option<String>,
    /// Whether the counterexample (if any) replayed successfully.
    pub replayed: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub network: String,
    pub states: usize,
    pub transitions: usize,
    pub elapsed: Duration,
    pub verdicts: Vec<PropertyVerdict>,
}

impl SuiteReport {
    pub fn all_hold(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn verdict(&self, id: &str) -> Option<&PropertyVerdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    /// Structured text report; wall time is left out so reports are
    /// reproducible.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "network: {}", self.network);
        let _ = writeln!(out, "states: {}", self.states);
        let _ = writeln!(out, "transitions: {}", self.transitions);
        let passed = self.verdicts.iter().filter(|v| v.holds).count();
        let _ = writeln!(out, "verdicts: {passed}/{} hold", self.verdicts.len());
        for v in &self.verdicts {
            let _ = writeln!(out);
            let _ = writeln!(out, "[{}] {}", v.id, if v.holds { "HOLDS" } else { "VIOLATED" });
            let _ = writeln!(out, "  description: {}", v.description);
            let _ = writeln!(out, "  query: {}", v.query);
            if let Some(t) = &v.trace_text {
                let _ = writeln!(out, "  counterexample:");
                out.push_str(t);
            }
        }
        out
    }
}

/// Explores the network once and checks P1-P9 followed by `app_properties`.
pub fn verify_generic_suite(net: &AutomatonNetwork, app_properties: &[NamedQuery]) -> Result<SuiteReport, AutomataError> {
    let started = Instant::now();
    let graph = compose_and_explore(net)?;
    let mut queries = generic_properties(net)?;
    queries.extend(app_properties.iter().cloned());
    let mut verdicts = Vec::new();
    for nq in &queries {
        let v = check(net, &graph, &nq.query)?;
        let (holds, trace, text, replayed) = match v {
            Verdict::Holds => (true, None, None, None),
            Verdict::Violated(t) => {
                let text = t.render(net, &graph);
                let ok = t.replays(net, &nq.query)?;
                (false, Some(t), Some(text), Some(ok))
            }
        };
        verdicts.push(PropertyVerdict {
            id: nq.id.clone(),
            description: nq.description.clone(),
            query: nq.query.to_string(),
            holds,
            trace,
            trace_text: text,
            replayed,
        });
    }
    Ok(SuiteReport {
        network: net.name.clone(),
        states: graph.len(),
        transitions: graph.num_edges(),
        elapsed: started.elapsed(),
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> SuiteReport {
        let net = AutomatonNetwork::from_toml(text).unwrap();
        let props = net.properties.clone();
        verify_generic_suite(&net, &props).unwrap()
    }

    #[test]
    fn shipped_networks_satisfy_all_properties() {
        for text in [include_str!("../../data/uuv_controller.toml"), include_str!("../../data/fx_controller.toml")] {
            let r = run(text);
            assert_eq!(r.verdicts.len(), 10);
            assert!(r.all_hold(), "{}", r.render());
        }
    }

    #[test]
    fn mutant_fixture_violates_r4() {
        let r = run(include_str!("../../data/uuv_controller_mutant.toml"));
        let v = r.verdict("R4").unwrap();
        assert!(!v.holds);
        assert_eq!(v.replayed, Some(true));
    }

    #[test]
    fn no_app_properties_gives_nine_verdicts() {
        let net = AutomatonNetwork::from_toml(include_str!("../../data/uuv_controller.toml")).unwrap();
        assert_eq!(verify_generic_suite(&net, &[]).unwrap().verdicts.len(), 9);
    }
}
