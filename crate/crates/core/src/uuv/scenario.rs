use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{apply_uuv, speed_grid, SensorSpec, Uuv, UuvConfig, UuvRequirements, UuvStep};
use crate::mape::{ChangeEvent, Effector, EventSource, StepFilter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("event `{0}` is earlier than the event before it")]
    UnorderedEvents(String),
    #[error("event `{event}` changes unknown parameter `{parameter}`")]
    UnknownParameter { event: String, parameter: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for SpeedGrid {
    fn default() -> Self {
        SpeedGrid { min: 1.0, max: 5.0, count: 21 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub period: f64,
    pub duration: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec { period: 100.0, duration: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UuvEvent {
    pub label: String,
    pub time: f64,
    pub rates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UuvScenario {
    pub name: String,
    #[serde(default = "default_weights")]
    pub weights: [f64; 2],
    /// Analysis deadline in seconds.
    #[serde(default)]
    pub deadline: Option<f64>,
    #[serde(default)]
    pub requirements: UuvRequirements,
    #[serde(default)]
    pub speed_grid: SpeedGrid,
    #[serde(default)]
    pub probe: ProbeSpec,
    pub sensors: Vec<SensorSpec>,
    #[serde(default)]
    pub events: Vec<UuvEvent>,
}

fn default_weights() -> [f64; 2] {
    [1.0, 200.0]
}

impl UuvScenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: UuvScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The shipped scenario reproducing the sensor degradation narrative.
    pub fn example() -> Self {
        Self::from_toml(include_str!("../../data/uuv_scenario.toml")).expect("shipped scenario is valid")
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.sensors.is_empty() {
            return Err(ScenarioError::Invalid("at least one sensor is required".into()));
        }
        for s in &self.sensors {
            s.check().map_err(ScenarioError::Invalid)?;
        }
        let g = &self.speed_grid;
        if !(g.min > 0.0 && g.max >= g.min && g.count >= 1) {
            return Err(ScenarioError::Invalid("speed grid must be non-empty with 0 < min <= max".into()));
        }
        if !(self.probe.period > 0.0 && self.probe.duration >= 0.0) {
            return Err(ScenarioError::Invalid("probe period must be positive".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ScenarioError::Invalid("weights must be non-negative".into()));
        }
        let params: Vec<String> = (0..self.sensors.len()).map(Uuv::rate_parameter).collect();
        let mut last = 0.0;
        for e in &self.events {
            if e.time < last || e.time < 0.0 {
                return Err(ScenarioError::UnorderedEvents(e.label.clone()));
            }
            last = e.time;
            for (p, v) in &e.rates {
                if !params.contains(p) {
                    return Err(ScenarioError::UnknownParameter { event: e.label.clone(), parameter: p.clone() });
                }
                if !v.is_finite() || *v < 0.0 {
                    return Err(ScenarioError::Invalid(format!("event {}: rate {p} must be non-negative", e.label)));
                }
            }
        }
        Ok(())
    }

    pub fn speeds(&self) -> Vec<f64> {
        speed_grid(self.speed_grid.min, self.speed_grid.max, self.speed_grid.count)
    }

    pub fn application(&self) -> Uuv {
        Uuv::new(self.sensors.clone(), self.requirements.clone(), &self.speeds())
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.weights[0], self.weights[1])
    }
}

/// Ground-truth state of the simulated vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct UuvTruth {
    pub sensors: Vec<bool>,
    pub speed: f64,
    pub rates: Vec<f64>,
}

impl UuvTruth {
    pub fn config(&self) -> UuvConfig {
        UuvConfig { sensors: self.sensors.clone(), speed: self.speed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UuvTraceRow {
    pub time: f64,
    pub speed: f64,
    pub sensors: Vec<bool>,
    pub rates: Vec<f64>,
    pub note: String,
}

/// Discrete-event vehicle simulator on a logical clock. Emits the
/// scenario's rate changes, runs periodic probes of degraded sensors that
/// are switched off, and accepts effector commands.
pub struct UuvSimulator {
    scenario: UuvScenario,
    truth: UuvTruth,
    now: f64,
    next: usize,
    started: bool,
    trace: Vec<UuvTraceRow>,
    reject: Option<StepFilter<UuvStep>>,
}

impl UuvSimulator {
    pub fn new(scenario: UuvScenario) -> Self {
        let n = scenario.sensors.len();
        let truth = UuvTruth { sensors: vec![false; n], speed: 0.0, rates: scenario.sensors.iter().map(|s| s.rate).collect() };
        let mut sim = UuvSimulator { scenario, truth, now: 0.0, next: 0, started: false, trace: Vec::new(), reject: None };
        sim.record("start");
        sim
    }

    /// Makes the effector reject steps matching `pred` (fault injection).
    pub fn reject_steps(&mut self, pred: impl Fn(&UuvStep) -> bool + Send + 'static) {
        self.reject = Some(Box::new(pred));
    }

    pub fn truth(&self) -> &UuvTruth {
        &self.truth
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn trace(&self) -> &[UuvTraceRow] {
        &self.trace
    }

    pub fn trace_csv(&self) -> String {
        let n = self.truth.sensors.len();
        let mut out = String::from("time,speed");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",r{i}"));
        }
        out.push_str(",note\n");
        for r in &self.trace {
            out.push_str(&format!("{},{}", r.time, r.speed));
            for b in &r.sensors {
                out.push_str(&format!(",{}", u8::from(*b)));
            }
            for x in &r.rates {
                out.push_str(&format!(",{x}"));
            }
            out.push_str(&format!(",{}\n", r.note));
        }
        out
    }

    fn record(&mut self, note: &str) {
        self.trace.push(UuvTraceRow {
            time: self.now,
            speed: self.truth.speed,
            sensors: self.truth.sensors.clone(),
            rates: self.truth.rates.clone(),
            note: note.to_string(),
        });
    }

    /// Off sensors whose true rate is below nominal.
    fn probe_candidates(&self) -> Vec<usize> {
        (0..self.truth.sensors.len())
            .filter(|&i| !self.truth.sensors[i] && self.truth.rates[i] < self.scenario.sensors[i].rate)
            .collect()
    }

    fn probe(&mut self, at: f64, sensors: &[usize]) -> ChangeEvent {
        self.now = at;
        let names: Vec<String> = sensors.iter().map(|i| (i + 1).to_string()).collect();
        let mut on = self.truth.clone();
        for &i in sensors {
            on.sensors[i] = true;
        }
        let saved = std::mem::replace(&mut self.truth, on);
        self.record(&format!("probe on {}", names.join(" ")));
        self.truth = saved;
        self.now = at + self.scenario.probe.duration;
        self.record("probe off");
        self.now = at;
        ChangeEvent {
            time: at,
            label: "probe".into(),
            changes: sensors.iter().map(|&i| (Uuv::rate_parameter(i), self.truth.rates[i])).collect(),
        }
    }
}

impl EventSource for UuvSimulator {
    fn next_event(&mut self) -> Option<ChangeEvent> {
        if !self.started {
            self.started = true;
            let changes = self.truth.rates.iter().enumerate().map(|(i, r)| (Uuv::rate_parameter(i), *r)).collect();
            return Some(ChangeEvent { time: 0.0, label: "A".into(), changes });
        }
        let upcoming = self.scenario.events.get(self.next).map_or(f64::INFINITY, |e| e.time);
        let candidates = self.probe_candidates();
        if !candidates.is_empty() {
            let period = self.scenario.probe.period;
            let at = ((self.now / period).floor() + 1.0) * period;
            if at < upcoming {
                return Some(self.probe(at, &candidates));
            }
        }
        let ev = self.scenario.events.get(self.next)?.clone();
        self.next += 1;
        self.now = ev.time;
        let mut changes = Vec::new();
        for (p, v) in &ev.rates {
            let i: usize = p[1..].parse::<usize>().expect("validated parameter") - 1;
            self.truth.rates[i] = *v;
            changes.push((p.clone(), *v));
        }
        self.record(&format!("event {}", ev.label));
        Some(ChangeEvent { time: ev.time, label: ev.label, changes })
    }
}

impl Effector<UuvStep> for UuvSimulator {
    fn apply(&mut self, step: &UuvStep) -> Result<(), String> {
        if let Some(r) = &self.reject {
            if r(step) {
                return Err(format!("{step} rejected by the vehicle"));
            }
        }
        let n = self.truth.sensors.len();
        match step {
            UuvStep::SensorOn(i) | UuvStep::SensorOff(i) if !(1..=n).contains(i) => {
                return Err(format!("CommandOnUnknownSensor({i})"));
            }
            UuvStep::SetSpeed(v) if !(v.is_finite() && *v >= 0.0) => return Err(format!("invalid speed {v}")),
            _ => {}
        }
        let c = apply_uuv(&self.truth.config(), step);
        self.truth.sensors = c.sensors;
        self.truth.speed = c.speed;
        self.record(&step.to_string());
        Ok(())
    }
}
