//! Command implementations behind the `dynassure` binary: controller
//! verification, scenario runs with an on-disk archive, and archive reports.

mod archive;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use archive::{
    check_archive, read_decisions, write_archive, ArchiveSummary, DecisionLine, TimingRow, DECISIONS, MANIFEST, TIMING, TRACE,
};

use crate::automata::{verify_generic_suite, AutomatonNetwork, SuiteReport};
use crate::fx::{self, FxScenario, FxSimulator, ServiceRegistry};
use crate::gsn::{instantiate_partial, load_pattern, DesignEvidence, GsnArgument};
use crate::mape::{run_loop, Application, Effector, EventSource, Knowledge, LoopOptions, LoopRecord};
use crate::uuv::{self, UuvScenario, UuvSimulator};

/// Wall seconds slept per logical second in wall-clock mode.
pub const WALL_CLOCK_PACE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Verification(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
}

impl HarnessError {
    /// 1 for verification and run failures, 2 for usage or configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AppKind {
    Uuv,
    Fx,
}

impl FromStr for AppKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uuv" => Ok(AppKind::Uuv),
            "fx" => Ok(AppKind::Fx),
            _ => Err(HarnessError::Usage(format!("unknown application `{s}` (expected uuv or fx)"))),
        }
    }
}

impl fmt::Display for AppKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AppKind::Uuv => "uuv",
            AppKind::Fx => "fx",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockMode {
    /// Events are processed back to back; archives are reproducible.
    LogicalClock,
    /// Events are paced by [`WALL_CLOCK_PACE`].
    WallClock,
}

impl FromStr for ClockMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logical-clock" | "logical" => Ok(ClockMode::LogicalClock),
            "wall-clock" | "wall" => Ok(ClockMode::WallClock),
            _ => Err(HarnessError::Usage(format!("unknown mode `{s}` (expected logical-clock or wall-clock)"))),
        }
    }
}

/// Parses `w1,w2`.
pub fn parse_weights(s: &str) -> Result<(f64, f64), HarnessError> {
    let bad = || HarnessError::Usage(format!("weights must be two comma-separated numbers, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

/// Everything one invocation needs. Unset paths fall back to the shipped
/// data files; unset weights and deadline come from the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub application: AppKind,
    pub scenario: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub weights: Option<(f64, f64)>,
    /// Analysis deadline in seconds.
    pub deadline: Option<f64>,
    pub out: Option<PathBuf>,
    pub mode: ClockMode,
    pub seed: u64,
}

impl RunManifest {
    pub fn new(application: AppKind) -> Self {
        RunManifest {
            application,
            scenario: None,
            registry: None,
            network: None,
            weights: None,
            deadline: None,
            out: None,
            mode: ClockMode::LogicalClock,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for p in [&self.scenario, &self.registry, &self.network].into_iter().flatten() {
            if !p.exists() {
                return Err(HarnessError::Config(format!("{} does not exist", p.display())));
            }
        }
        if self.registry.is_some() && self.application != AppKind::Fx {
            return Err(HarnessError::Usage("--registry only applies to the fx application".into()));
        }
        if let Some(d) = self.deadline {
            if !(d.is_finite() && d >= 0.0) {
                return Err(HarnessError::Config(format!("deadline must be a non-negative number of seconds, got {d}")));
            }
        }
        if let Some((a, b)) = self.weights {
            if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                return Err(HarnessError::Config("weights must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn load_network(&self) -> Result<AutomatonNetwork, HarnessError> {
        let net = match &self.network {
            Some(p) => AutomatonNetwork::load(p),
            None => AutomatonNetwork::from_toml(match self.application {
                AppKind::Uuv => uuv::CONTROLLER_NETWORK,
                AppKind::Fx => fx::CONTROLLER_NETWORK,
            }),
        };
        net.map_err(|e| HarnessError::Config(e.to_string()))
    }
}

pub const REPORT_FILE: &str = "controller_report.txt";

pub struct ControllerRun {
    pub report: SuiteReport,
    pub report_path: Option<PathBuf>,
}

impl ControllerRun {
    pub fn exit_code(&self) -> i32 {
        if self.report.all_hold() {
            0
        } else {
            1
        }
    }
}

/// Checks P1-P9 and the network's own properties; writes the report to
/// `<out>/controller_report.txt` when an output directory is given.
pub fn cmd_verify_controller(m: &RunManifest) -> Result<ControllerRun, HarnessError> {
    m.validate()?;
    let net = m.load_network()?;
    let report = verify_generic_suite(&net, &net.properties).map_err(|e| HarnessError::Verification(e.to_string()))?;
    let report_path = match &m.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let p = dir.join(REPORT_FILE);
            std::fs::write(&p, report.render()).map_err(|e| io_err(&p, e))?;
            Some(p)
        }
        None => None,
    };
    Ok(ControllerRun { report, report_path })
}

/// Outcome of a scenario run, with the records as archived.
pub struct ScenarioRun {
    pub archive: Option<PathBuf>,
    pub decisions: Vec<DecisionLine>,
    pub timing: Vec<TimingRow>,
    pub controller: SuiteReport,
    pub partial: GsnArgument,
    pub arguments: usize,
}

/// Verifies the controller, builds the partial argument, drives the loop
/// over the scenario's events and archives the results.
pub fn cmd_run_scenario(m: &RunManifest) -> Result<ScenarioRun, HarnessError> {
    m.validate()?;
    let opts = LoopOptions { pace: (m.mode == ClockMode::WallClock).then_some(WALL_CLOCK_PACE), ..LoopOptions::new() };
    match m.application {
        AppKind::Uuv => {
            let scenario = match &m.scenario {
                Some(p) => UuvScenario::load(p),
                None => Ok(UuvScenario::example()),
            }
            .map_err(|e| HarnessError::Config(e.to_string()))?;
            let app = scenario.application();
            let mut sim = UuvSimulator::new(scenario.clone());
            let weights = m.weights.unwrap_or(scenario.weights());
            let deadline = m.deadline.or(scenario.deadline);
            let initial = app.initial_config();
            let mut run = drive(m, &app, initial, weights, deadline, &mut sim, &opts)?;
            finish(m, &mut run, &sim.trace_csv())
        }
        AppKind::Fx => {
            let registry = match &m.registry {
                Some(p) => ServiceRegistry::load(p).map_err(|e| HarnessError::Config(e.to_string()))?,
                None => ServiceRegistry::default_table(),
            };
            let scenario = match &m.scenario {
                Some(p) => FxScenario::load(p),
                None => Ok(FxScenario::example()),
            }
            .map_err(|e| HarnessError::Config(e.to_string()))?;
            let app = scenario.application(registry.clone()).map_err(|e| HarnessError::Config(e.to_string()))?;
            let initial = app.initial_config();
            let mut sim = FxSimulator::new(registry, scenario.clone(), initial.clone());
            let weights = m.weights.unwrap_or(scenario.weights());
            let deadline = m.deadline.or(scenario.deadline);
            let mut run = drive(m, &app, initial, weights, deadline, &mut sim, &opts)?;
            finish(m, &mut run, &sim.trace_csv())
        }
    }
}

struct Driven<A: Application> {
    knowledge: Knowledge<A::Config>,
    records: Vec<LoopRecord<A::Config>>,
    controller: SuiteReport,
}

fn drive<A, S>(
    m: &RunManifest,
    app: &A,
    initial: A::Config,
    weights: (f64, f64),
    deadline: Option<f64>,
    sim: &mut S,
    opts: &LoopOptions,
) -> Result<Driven<A>, HarnessError>
where
    A: Application,
    S: EventSource + Effector<A::Step>,
{
    let net = m.load_network()?;
    let controller = verify_generic_suite(&net, &net.properties).map_err(|e| HarnessError::Verification(e.to_string()))?;
    let partial = design_time_argument(app, &controller, &initial.to_string())?;
    let mut k = Knowledge::new(initial, weights, partial);
    if let Some(d) = deadline {
        k.deadline = Duration::from_secs_f64(d);
    }
    let records = run_loop(app, &mut k, sim, opts);
    Ok(Driven { knowledge: k, records, controller })
}

/// Partial argument backed by the controller verification report.
pub fn design_time_argument<A: Application>(
    app: &A,
    report: &SuiteReport,
    deployment: &str,
) -> Result<GsnArgument, HarnessError> {
    let design = DesignEvidence::from_report(report);
    instantiate_partial(&load_pattern(), app.name(), &app.requirements(), &design, deployment)
        .map_err(|e| HarnessError::Verification(format!("controller evidence rejected: {e}")))
}

fn finish<A: Application>(m: &RunManifest, run: &mut Driven<A>, trace_csv: &str) -> Result<ScenarioRun, HarnessError> {
    let (decisions, timing) = archive::decision_lines(&run.records);
    if let Some(dir) = &m.out {
        write_archive(dir, m, &run.controller, &run.knowledge, &run.records, trace_csv)?;
    }
    Ok(ScenarioRun {
        archive: m.out.clone(),
        arguments: run.knowledge.arguments.len(),
        decisions,
        timing,
        controller: run.controller.clone(),
        partial: run.knowledge.partial.clone(),
    })
}

/// Checks the archive for referential completeness and renders a summary.
pub fn cmd_report(dir: &Path) -> Result<String, HarnessError> {
    archive::check_archive(dir).map(|s| s.render())
}
