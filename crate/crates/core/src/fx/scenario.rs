use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{apply_fx, Fx, FxConfig, FxRequirements, FxStep, Operation, ServiceRegistry, WorkflowParams, NO_SERVICE};
use crate::mape::{ChangeEvent, Effector, EventSource, StepFilter};
use crate::uuv::ScenarioError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FxEvent {
    pub label: String,
    pub time: f64,
    /// Observed service characteristics, e.g. `p_MW0` or `time_FA1`.
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FxScenario {
    pub name: String,
    #[serde(default = "default_weights")]
    pub weights: [f64; 2],
    #[serde(default)]
    pub deadline: Option<f64>,
    #[serde(default)]
    pub requirements: FxRequirements,
    #[serde(default)]
    pub workflow: WorkflowParams,
    #[serde(default)]
    pub events: Vec<FxEvent>,
}

fn default_weights() -> [f64; 2] {
    [1.0, 2.0]
}

impl FxScenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn example() -> Self {
        Self::from_toml(include_str!("../../data/fx_scenario.toml")).expect("shipped scenario is valid")
    }

    /// Validates the scenario against the services of `registry`.
    pub fn check(&self, registry: &ServiceRegistry) -> Result<(), ScenarioError> {
        self.workflow.check().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ScenarioError::Invalid("weights must be non-negative".into()));
        }
        let known = registry.observations();
        let mut last = 0.0;
        for e in &self.events {
            if e.time < last || e.time < 0.0 {
                return Err(ScenarioError::UnorderedEvents(e.label.clone()));
            }
            last = e.time;
            for (p, v) in &e.values {
                if !known.contains_key(p) {
                    return Err(ScenarioError::UnknownParameter { event: e.label.clone(), parameter: p.clone() });
                }
                let ok = if p.starts_with("p_") { (0.0..=1.0).contains(v) } else { v.is_finite() && *v >= 0.0 };
                if !ok {
                    return Err(ScenarioError::Invalid(format!("event {}: {p} = {v} is out of range", e.label)));
                }
            }
        }
        Ok(())
    }

    pub fn application(&self, registry: ServiceRegistry) -> Result<Fx, ScenarioError> {
        self.check(&registry)?;
        Fx::new(registry, self.workflow.clone(), self.requirements.clone()).map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.weights[0], self.weights[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FxTraceRow {
    pub time: f64,
    pub config: String,
    pub note: String,
}

/// Service-based system on a logical clock: publishes changes in observed
/// service characteristics and rebinds operations on command.
pub struct FxSimulator {
    registry: ServiceRegistry,
    scenario: FxScenario,
    observed: BTreeMap<String, f64>,
    bound: FxConfig,
    now: f64,
    next: usize,
    started: bool,
    trace: Vec<FxTraceRow>,
    reject: Option<StepFilter<FxStep>>,
}

impl FxSimulator {
    pub fn new(registry: ServiceRegistry, scenario: FxScenario, initial: FxConfig) -> Self {
        let observed = registry.observations();
        let mut sim = FxSimulator {
            registry,
            scenario,
            observed,
            bound: initial,
            now: 0.0,
            next: 0,
            started: false,
            trace: Vec::new(),
            reject: None,
        };
        sim.record("start");
        sim
    }

    pub fn reject_steps(&mut self, pred: impl Fn(&FxStep) -> bool + Send + 'static) {
        self.reject = Some(Box::new(pred));
    }

    pub fn bound(&self) -> &FxConfig {
        &self.bound
    }

    pub fn observed(&self) -> &BTreeMap<String, f64> {
        &self.observed
    }

    pub fn trace(&self) -> &[FxTraceRow] {
        &self.trace
    }

    pub fn trace_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["time", "config", "note"]).expect("in-memory write");
        for r in &self.trace {
            w.write_record([r.time.to_string(), r.config.clone(), r.note.clone()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    fn record(&mut self, note: &str) {
        self.trace.push(FxTraceRow { time: self.now, config: self.bound.to_string(), note: note.to_string() });
    }
}

impl EventSource for FxSimulator {
    fn next_event(&mut self) -> Option<ChangeEvent> {
        if !self.started {
            self.started = true;
            let changes = self.observed.iter().map(|(k, v)| (k.clone(), *v)).collect();
            return Some(ChangeEvent { time: 0.0, label: "A".into(), changes });
        }
        let ev = self.scenario.events.get(self.next)?.clone();
        self.next += 1;
        self.now = ev.time;
        for (k, v) in &ev.values {
            self.observed.insert(k.clone(), *v);
        }
        self.record(&format!("event {}", ev.label));
        Some(ChangeEvent { time: ev.time, label: ev.label, changes: ev.values.into_iter().collect() })
    }
}

impl Effector<FxStep> for FxSimulator {
    fn apply(&mut self, step: &FxStep) -> Result<(), String> {
        if let Some(r) = &self.reject {
            if r(step) {
                return Err(format!("{step} rejected by the service bus"));
            }
        }
        let known = match self.registry.service(&step.service) {
            Some(s) => s.operation == step.operation,
            None => step.service == NO_SERVICE && step.operation == Operation::Order,
        };
        if !known {
            return Err(format!("UnknownService({})", step.service));
        }
        self.bound = apply_fx(&self.bound, step);
        self.record(&step.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_emissions() {
        let fx = Fx::calibrated();
        let mut sim = FxSimulator::new(fx.registry.clone(), FxScenario::example(), fx.initial_config());
        let first = sim.next_event().unwrap();
        assert_eq!(first.changes.len(), 36);
        let mut labels = vec![first.label];
        while let Some(e) = sim.next_event() {
            labels.push(e.label);
        }
        assert_eq!(labels, vec!["A", "B", "C", "D", "E", "F", "G"]);
        // G restores every drifted value.
        assert_eq!(sim.observed(), &fx.registry.observations());
    }

    #[test]
    fn unknown_service_is_refused() {
        let fx = Fx::calibrated();
        let mut sim = FxSimulator::new(fx.registry.clone(), FxScenario::example(), fx.configs[0].clone());
        let bad = FxStep { operation: Operation::Alarm, service: "Al7".into() };
        assert_eq!(sim.apply(&bad), Err("UnknownService(Al7)".into()));
        let wrong_op = FxStep { operation: Operation::Alarm, service: "MW0".into() };
        assert!(sim.apply(&wrong_op).is_err());
        sim.apply(&FxStep { operation: Operation::Order, service: NO_SERVICE.into() }).unwrap();
        assert!(sim.bound().is_failsafe());
    }

    #[test]
    fn rejects_bad_scenarios() {
        let r = ServiceRegistry::default_table();
        let mut s = FxScenario::example();
        s.events[0].values.insert("p_XX9".into(), 0.5);
        assert!(matches!(s.check(&r), Err(ScenarioError::UnknownParameter { .. })));
        let mut s = FxScenario::example();
        s.events[0].values.insert("p_MW0".into(), 1.5);
        assert!(matches!(s.check(&r), Err(ScenarioError::Invalid(_))));
        let mut s = FxScenario::example();
        s.events.swap(1, 2);
        assert!(matches!(s.check(&r), Err(ScenarioError::UnorderedEvents(_))));
    }
}
