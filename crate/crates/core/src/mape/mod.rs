//! Event-triggered monitor / analyse / plan / execute loop over a shared
//! knowledge repository. Applications plug in through [`Application`].

mod evidence;

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use evidence::{row_digest, EvidenceTable};

use crate::deadline::Deadline;
use crate::gsn::{instantiate_full, ArgumentHistory, Assurance, EvidenceItem, GsnArgument, RequirementSpec, RuntimeBinding};
use crate::verifier::{verify_config_space_with, BatchOutcome, ConfigRecord, LatencyInjection, ParametricSystem};

/// Relative change of a sensed value that makes analysis necessary.
pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;
pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(2);

/// What the loop needs to know about a managed system.
pub trait Application {
    type Config: Clone + PartialEq + fmt::Debug + fmt::Display + ConfigRecord;
    type Step: Clone + PartialEq + fmt::Debug + fmt::Display;
    type System: ParametricSystem<Config = Self::Config>;

    fn name(&self) -> &str;
    fn sensed_parameters(&self) -> Vec<String>;
    /// Candidate configurations in enumeration order.
    fn configurations(&self) -> &[Self::Config];
    /// Verification problem for the currently observed environment.
    fn system(&self, observations: &BTreeMap<String, f64>) -> Result<Self::System, String>;
    /// Column names for the verified properties, in property order.
    fn property_names(&self) -> Vec<String>;
    fn cost(&self, config: &Self::Config, values: &[f64], weights: (f64, f64)) -> f64;
    fn failsafe(&self, current: &Self::Config) -> Self::Config;
    fn plan(&self, current: &Self::Config, target: &Self::Config) -> Result<Vec<Self::Step>, PlanError>;
    fn apply(&self, config: &Self::Config, step: &Self::Step) -> Self::Config;
    fn requirements(&self) -> Vec<RequirementSpec>;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("current and target configuration are the same")]
    SameConfiguration,
    #[error("configurations are incompatible: {0}")]
    Incompatible(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("unknown sensed parameter `{0}`")]
    UnknownParameter(String),
    #[error("observation of `{parameter}` at t={got} is older than the last one at t={last}")]
    StaleTimestamp { parameter: String, last: f64, got: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("effector rejected {step}: {reason}")]
pub struct EffectorFailure {
    pub step: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorOutcome {
    NoAction,
    AnalysisTriggered,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailsafeReason {
    NoFeasibleConfiguration { verified: usize },
    DeadlineExceeded { verified: usize, total: usize },
    Model(String),
}

impl fmt::Display for FailsafeReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailsafeReason::NoFeasibleConfiguration { verified } => {
                write!(f, "none of the {verified} verified configurations is feasible")
            }
            FailsafeReason::DeadlineExceeded { verified, total } => {
                write!(f, "analysis deadline exceeded after {verified} of {total} configurations")
            }
            FailsafeReason::Model(m) => write!(f, "verification problem could not be built: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision<C> {
    Keep,
    Adapt { target: C },
    Failsafe { target: C, reason: FailsafeReason },
}

impl<C> Decision<C> {
    pub fn kind(&self) -> &'static str {
        match self {
            Decision::Keep => "keep",
            Decision::Adapt { .. } => "adapt",
            Decision::Failsafe { .. } => "failsafe",
        }
    }

    pub fn target(&self) -> Option<&C> {
        match self {
            Decision::Keep => None,
            Decision::Adapt { target } | Decision::Failsafe { target, .. } => Some(target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub value: f64,
    pub time: f64,
}

/// Result of one analysis: the decision plus the evidence it rests on.
#[derive(Debug, Clone)]
pub struct Analysis<C> {
    pub decision: Decision<C>,
    pub outcome: BatchOutcome<C>,
    /// Cost of each entry in `outcome.entries`; `None` for infeasible ones.
    pub costs: Vec<Option<f64>>,
    /// Position in `outcome.entries` of the cheapest feasible configuration.
    pub best: Option<usize>,
}

impl<C> Analysis<C> {
    pub fn feasible_count(&self) -> usize {
        self.costs.iter().filter(|c| c.is_some()).count()
    }
}

/// A sensed change delivered to the monitor. One event may carry several
/// parameter updates observed at the same time.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEvent {
    pub time: f64,
    pub label: String,
    pub changes: Vec<(String, f64)>,
}

pub trait EventSource {
    fn next_event(&mut self) -> Option<ChangeEvent>;
}

/// Predicate deciding which steps a simulated effector rejects.
pub type StepFilter<S> = Box<dyn Fn(&S) -> bool + Send>;

pub trait Effector<Step> {
    fn apply(&mut self, step: &Step) -> Result<(), String>;
}

/// One iteration of the loop, as kept in the evidence log.
#[derive(Debug, Clone)]
pub struct LoopRecord<C> {
    pub seq: usize,
    pub time: f64,
    pub event: String,
    pub changes: Vec<(String, f64)>,
    pub triggered: bool,
    pub decision: Decision<C>,
    pub previous: C,
    pub plan: Vec<String>,
    /// Configuration in effect after the iteration.
    pub applied: C,
    pub errors: Vec<String>,
    pub analysis: Option<Analysis<C>>,
    pub evidence: Option<EvidenceTable>,
    pub argument_version: Option<u64>,
    /// Wall time from the event being handled to the end of execution.
    pub reaction: Duration,
}

pub struct Knowledge<C> {
    pub current: C,
    pub observations: BTreeMap<String, Observation>,
    pub weights: (f64, f64),
    /// Analysis deadline; it also bounds how long the controller may stay in
    /// analysis before acting.
    pub deadline: Duration,
    pub significance: f64,
    pub partial: GsnArgument,
    pub arguments: ArgumentHistory,
    pub log: Vec<LoopRecord<C>>,
}

impl<C: Clone> Knowledge<C> {
    pub fn new(initial: C, weights: (f64, f64), partial: GsnArgument) -> Self {
        Knowledge {
            current: initial,
            observations: BTreeMap::new(),
            weights,
            deadline: DEFAULT_DEADLINE,
            significance: DEFAULT_SIGNIFICANCE,
            partial,
            arguments: ArgumentHistory::new(),
            log: Vec::new(),
        }
    }

    pub fn observed_values(&self) -> BTreeMap<String, f64> {
        self.observations.iter().map(|(k, o)| (k.clone(), o.value)).collect()
    }
}

pub fn monitor_step<A: Application>(
    app: &A,
    k: &mut Knowledge<A::Config>,
    parameter: &str,
    value: f64,
    time: f64,
) -> Result<MonitorOutcome, MonitorError> {
    if !app.sensed_parameters().iter().any(|p| p == parameter) {
        return Err(MonitorError::UnknownParameter(parameter.to_string()));
    }
    let significant = match k.observations.get(parameter) {
        Some(old) if time < old.time => {
            return Err(MonitorError::StaleTimestamp { parameter: parameter.to_string(), last: old.time, got: time });
        }
        Some(old) if old.value == 0.0 => value != 0.0,
        Some(old) => ((value - old.value) / old.value).abs() >= k.significance,
        None => true,
    };
    k.observations.insert(parameter.to_string(), Observation { value, time });
    Ok(if significant { MonitorOutcome::AnalysisTriggered } else { MonitorOutcome::NoAction })
}

pub fn analyze<A: Application>(
    app: &A,
    k: &Knowledge<A::Config>,
    deadline: &Deadline,
    latency: Option<&LatencyInjection>,
) -> Analysis<A::Config> {
    let failsafe = |reason, outcome| Analysis {
        decision: Decision::Failsafe { target: app.failsafe(&k.current), reason },
        outcome,
        costs: Vec::new(),
        best: None,
    };
    let system = match app.system(&k.observed_values()) {
        Ok(s) => s,
        Err(e) => {
            let empty = BatchOutcome { entries: Vec::new(), deadline_exceeded: false, elapsed: Duration::ZERO };
            return failsafe(FailsafeReason::Model(e), empty);
        }
    };
    let configs = app.configurations();
    let outcome = verify_config_space_with(&system, configs, deadline, latency);
    if outcome.deadline_exceeded {
        let reason = FailsafeReason::DeadlineExceeded { verified: outcome.entries.len(), total: configs.len() };
        return failsafe(reason, outcome);
    }
    let costs: Vec<Option<f64>> = outcome
        .entries
        .iter()
        .map(|e| {
            let values: Vec<f64> = e.results.as_ref().ok()?.iter().map(|r| r.value).collect();
            e.feasible().then(|| app.cost(&e.config, &values, k.weights))
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, c) in costs.iter().enumerate() {
        if let Some(c) = c {
            if best.is_none_or(|b| *c < costs[b].unwrap()) {
                best = Some(i);
            }
        }
    }
    let Some(b) = best else {
        return failsafe(FailsafeReason::NoFeasibleConfiguration { verified: outcome.entries.len() }, outcome);
    };
    let target = outcome.entries[b].config.clone();
    let decision = if target == k.current { Decision::Keep } else { Decision::Adapt { target } };
    Analysis { decision, outcome, costs, best: Some(b) }
}

/// Applies `plan` step by step. On a rejected step the remaining steps are
/// dropped and the configuration reached so far stays current.
pub fn execute<A: Application, E: Effector<A::Step> + ?Sized>(
    app: &A,
    k: &mut Knowledge<A::Config>,
    plan: &[A::Step],
    effectors: &mut E,
) -> Result<A::Config, EffectorFailure> {
    for step in plan {
        effectors.apply(step).map_err(|reason| EffectorFailure { step: step.to_string(), reason })?;
        k.current = app.apply(&k.current, step);
    }
    Ok(k.current.clone())
}

/// Evidence items backing a full argument for `decision`.
pub fn runtime_evidence<A: Application>(app: &A, analysis: &Analysis<A::Config>, table: &EvidenceTable) -> Vec<EvidenceItem> {
    let names = app.property_names();
    let runtime = app.requirements().into_iter().filter(|r| r.assurance == Assurance::Runtime);
    match &analysis.decision {
        Decision::Keep => Vec::new(),
        Decision::Failsafe { target, reason } => {
            let digest = table.failsafe_digest().unwrap_or_default();
            runtime
                .map(|r| EvidenceItem {
                    requirement: r.id.clone(),
                    digest: digest.clone(),
                    summary: format!(
                        "{} cannot be assured at run time ({reason}); failsafe configuration {target} adopted",
                        r.id
                    ),
                })
                .collect()
        }
        Decision::Adapt { target } => {
            let Some(b) = analysis.best else { return Vec::new() };
            let entry = &analysis.outcome.entries[b];
            let digest = table.digest_of(&target.to_string()).unwrap_or_default();
            let results = entry.results.as_ref().map(|r| r.as_slice()).unwrap_or(&[]);
            runtime
                .map(|r| {
                    let summary = match names.iter().position(|n| *n == r.id).and_then(|i| results.get(i)) {
                        Some(res) => format!("{} evaluates to {} for {target}", res.property, res.value),
                        None => format!(
                            "cost {} is minimal among {} feasible configurations",
                            analysis.costs[b].unwrap_or(f64::NAN),
                            analysis.feasible_count()
                        ),
                    };
                    EvidenceItem { requirement: r.id.clone(), digest: digest.clone(), summary }
                })
                .collect()
        }
    }
}

#[derive(Clone, Default)]
pub struct LoopOptions {
    pub latency: Option<LatencyInjection>,
    /// Re-analyses allowed after effector failures within one event.
    pub max_retries: usize,
    /// Wall seconds to sleep per logical second between events; `None`
    /// processes events back to back.
    pub pace: Option<f64>,
}

impl LoopOptions {
    pub fn new() -> Self {
        LoopOptions { latency: None, max_retries: 2, pace: None }
    }
}

/// Handles one event: monitor, then (if triggered) analyse, plan, execute
/// and emit an argument. Appends one record per analysis to `k.log`.
pub fn handle_event<A, M>(app: &A, k: &mut Knowledge<A::Config>, system: &mut M, event: &ChangeEvent, opts: &LoopOptions)
where
    A: Application,
    M: Effector<A::Step> + ?Sized,
{
    let started = Instant::now();
    let mut errors = Vec::new();
    let mut triggered = false;
    for (p, v) in &event.changes {
        match monitor_step(app, k, p, *v, event.time) {
            Ok(MonitorOutcome::AnalysisTriggered) => triggered = true,
            Ok(MonitorOutcome::NoAction) => {}
            Err(e) => errors.push(e.to_string()),
        }
    }
    if !triggered {
        let current = k.current.clone();
        push_record(k, event, false, Decision::Keep, current, Vec::new(), errors, None, None, None, started);
        return;
    }
    let mut attempt = 0;
    loop {
        let deadline = Deadline::after(k.deadline);
        let analysis = analyze(app, k, &deadline, opts.latency.as_ref());
        let previous = k.current.clone();
        let table = EvidenceTable::build(app, &analysis);
        let mut plan_text = Vec::new();
        let mut retry = false;
        let mut version = None;
        if let Some(target) = analysis.decision.target().cloned() {
            let executed = if target == k.current {
                true
            } else {
                match app.plan(&k.current, &target) {
                    Ok(plan) => {
                        plan_text = plan.iter().map(|s| s.to_string()).collect();
                        match execute(app, k, &plan, system) {
                            Ok(_) => true,
                            Err(e) => {
                                errors.push(e.to_string());
                                retry = true;
                                false
                            }
                        }
                    }
                    Err(e) => {
                        errors.push(e.to_string());
                        false
                    }
                }
            };
            if executed {
                let binding = RuntimeBinding {
                    config: target.to_string(),
                    evidence: runtime_evidence(app, &analysis, &table),
                    timestamp: event.time,
                };
                match instantiate_full(&k.partial, &binding) {
                    Ok(arg) => version = Some(k.arguments.push(arg)),
                    Err(e) => errors.push(e.to_string()),
                }
            }
        }
        let decision = analysis.decision.clone();
        push_record(
            k,
            event,
            true,
            decision,
            previous,
            plan_text,
            std::mem::take(&mut errors),
            Some(analysis),
            Some(table),
            version,
            started,
        );
        attempt += 1;
        if !retry || attempt > opts.max_retries {
            break;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn push_record<C: Clone>(
    k: &mut Knowledge<C>,
    event: &ChangeEvent,
    triggered: bool,
    decision: Decision<C>,
    previous: C,
    plan: Vec<String>,
    errors: Vec<String>,
    analysis: Option<Analysis<C>>,
    evidence: Option<EvidenceTable>,
    argument_version: Option<u64>,
    started: Instant,
) {
    let seq = k.log.len() + 1;
    let time = k.log.last().map_or(event.time, |r| r.time.max(event.time));
    k.log.push(LoopRecord {
        seq,
        time,
        event: event.label.clone(),
        changes: event.changes.clone(),
        triggered,
        decision,
        previous,
        plan,
        applied: k.current.clone(),
        errors,
        analysis,
        evidence,
        argument_version,
        reaction: started.elapsed(),
    });
}

/// Runs the loop until the event source is exhausted and returns the
/// records appended during this run.
pub fn run_loop<A, M>(app: &A, k: &mut Knowledge<A::Config>, system: &mut M, opts: &LoopOptions) -> Vec<LoopRecord<A::Config>>
where
    A: Application,
    M: EventSource + Effector<A::Step>,
{
    let first = k.log.len();
    let mut last_time: Option<f64> = None;
    while let Some(event) = system.next_event() {
        if let (Some(pace), Some(t0)) = (opts.pace, last_time) {
            let gap = (event.time - t0).max(0.0) * pace;
            std::thread::sleep(Duration::from_secs_f64(gap));
        }
        last_time = Some(event.time);
        handle_event(app, k, system, &event, opts);
    }
    k.log[first..].to_vec()
}

#[cfg(test)]
mod tests;
