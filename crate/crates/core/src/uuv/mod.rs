//! Unmanned underwater vehicle with n on/off sensors and a speed setting.
//! Each sensor is a CTMC whose measurement accuracy degrades with speed;
//! requirements bound measurements and energy per mission window and the
//! cost trades energy against speed.

mod scenario;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Bound;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scenario::{ProbeSpec, ScenarioError, SpeedGrid, UuvEvent, UuvScenario, UuvSimulator, UuvTraceRow, UuvTruth};

use crate::expr::Expr;
use crate::gsn::RequirementSpec;
use crate::mape::{Application, PlanError};
use crate::model::{IndependentSum, MarkovModel, ModelKind, ModelTemplate, Parameter};
use crate::verifier::{Comparison, ConfigRecord, ParametricSystem, Property, Subject, VerifyError};

/// Rate (1/s) at which a sensor returns to `ready` after a measurement.
pub const COMPLETION_RATE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub name: String,
    /// Nominal measurement rate (1/s).
    pub rate: f64,
    /// Energy per measurement (J).
    pub energy: f64,
    /// Energy for switching on / off (J), charged per mission window.
    pub energy_on: f64,
    pub energy_off: f64,
    /// Accuracy model p(sp) = clamp(p_max - kappa * sp, 0, 1).
    pub p_max: f64,
    pub kappa: f64,
}

impl SensorSpec {
    pub fn accuracy(&self, speed: f64) -> f64 {
        (self.p_max - self.kappa * speed).clamp(0.0, 1.0)
    }

    pub fn check(&self) -> Result<(), String> {
        let vals = [self.rate, self.energy, self.energy_on, self.energy_off, self.kappa];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(format!("sensor {}: values must be finite and non-negative", self.name));
        }
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(format!("sensor {}: p_max must lie in (0, 1]", self.name));
        }
        Ok(())
    }
}

/// The calibrated three-sensor vehicle.
pub fn default_sensors() -> Vec<SensorSpec> {
    let row = |name: &str, rate, energy, energy_on, energy_off, p_max, kappa| SensorSpec {
        name: name.into(),
        rate,
        energy,
        energy_on,
        energy_off,
        p_max,
        kappa,
    };
    vec![
        row("sensor1", 5.0, 3.0, 10.0, 2.0, 0.98, 0.07),
        row("sensor2", 4.0, 2.4, 8.0, 1.5, 0.97, 0.075),
        row("sensor3", 4.0, 2.1, 5.0, 1.0, 1.0, 0.105),
    ]
}

fn e(text: &str) -> Expr {
    Expr::parse(text).expect("built-in expression")
}

/// Generic sensor CTMC with parameters r (rate), p (accuracy) and e
/// (energy per measurement).
pub fn generic_sensor_template() -> ModelTemplate {
    let mut t = ModelTemplate::new(ModelKind::Ctmc, vec!["ready".into(), "accurate".into(), "inaccurate".into()]);
    t.declare(Parameter::new("r", "1/s", Bound::Excluded(0.0), Bound::Included(1000.0)))
        .declare(Parameter::probability("p"))
        .declare(Parameter::non_negative("e", "J"));
    let c = Expr::Num(COMPLETION_RATE);
    t.transition("ready", "accurate", e("r * p")).expect("state exists");
    t.transition("ready", "inaccurate", e("r * (1 - p)")).expect("state exists");
    t.transition("accurate", "ready", c.clone()).expect("state exists");
    t.transition("inaccurate", "ready", c).expect("state exists");
    t.label("ready", &["ready"]).expect("state exists");
    t.transition_reward("measure", "ready", "accurate", Expr::Num(1.0)).expect("state exists");
    t.transition_reward("energy", "ready", "accurate", e("e")).expect("state exists");
    t.transition_reward("energy", "ready", "inaccurate", e("e")).expect("state exists");
    t
}

/// Sensor template over (r, sp) with the accuracy and energy of `spec`
/// substituted.
pub fn build_sensor_template(spec: &SensorSpec) -> ModelTemplate {
    let accuracy = e(&format!("clamp({} - {} * sp, 0, 1)", spec.p_max, spec.kappa));
    generic_sensor_template()
        .reparameterize("p", &accuracy, vec![Parameter::non_negative("sp", "m/s")])
        .and_then(|t| t.reparameterize("e", &Expr::Num(spec.energy), Vec::new()))
        .expect("sensor template parameters are declared")
}

#[derive(Debug, Clone, PartialEq)]
pub struct UuvConfig {
    pub sensors: Vec<bool>,
    pub speed: f64,
}

impl UuvConfig {
    pub fn new(bits: &[u8], speed: f64) -> Self {
        UuvConfig { sensors: bits.iter().map(|&b| b != 0).collect(), speed }
    }

    pub fn is_failsafe(&self) -> bool {
        self.speed == 0.0
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.sensors.iter().enumerate().filter(|(_, on)| **on).map(|(i, _)| i)
    }
}

impl fmt::Display for UuvConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for b in &self.sensors {
            write!(f, "{}, ", u8::from(*b))?;
        }
        write!(f, "{})", self.speed)
    }
}

impl ConfigRecord for UuvConfig {
    fn field_names(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.sensors.len()).map(|i| format!("x{i}")).collect();
        v.push("sp".into());
        v
    }

    fn field_values(&self) -> Vec<String> {
        let mut v: Vec<String> = self.sensors.iter().map(|b| u8::from(*b).to_string()).collect();
        v.push(self.speed.to_string());
        v
    }
}

/// All non-empty sensor subsets times all grid speeds: subset bitmask
/// ascending (sensor 1 most significant), then speed ascending.
pub fn enumerate_uuv_configs(n: usize, speed_grid: &[f64]) -> Vec<UuvConfig> {
    let mut speeds = speed_grid.to_vec();
    speeds.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(((1usize << n) - 1) * speeds.len());
    for mask in 1usize..(1 << n) {
        let sensors: Vec<bool> = (0..n).map(|i| (mask >> (n - 1 - i)) & 1 == 1).collect();
        for &sp in &speeds {
            out.push(UuvConfig { sensors: sensors.clone(), speed: sp });
        }
    }
    out
}

/// `count` evenly spaced speeds in `[min, max]`, rounded to 1e-9 so that
/// values print cleanly.
pub fn speed_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![min];
    }
    (0..count)
        .map(|k| {
            let x = min + (max - min) * k as f64 / (count - 1) as f64;
            (x * 1e9).round() / 1e9
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UuvStep {
    /// Sensor numbers are 1-based.
    SensorOn(usize),
    SensorOff(usize),
    SetSpeed(f64),
}

impl fmt::Display for UuvStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UuvStep::SensorOn(i) => write!(f, "SensorOn({i})"),
            UuvStep::SensorOff(i) => write!(f, "SensorOff({i})"),
            UuvStep::SetSpeed(v) => write!(f, "SetSpeed({v})"),
        }
    }
}

/// Switch on first, then off, then change speed.
pub fn plan_uuv(current: &UuvConfig, target: &UuvConfig) -> Result<Vec<UuvStep>, PlanError> {
    if current.sensors.len() != target.sensors.len() {
        return Err(PlanError::Incompatible("different number of sensors".into()));
    }
    if current == target {
        return Err(PlanError::SameConfiguration);
    }
    let pairs = || current.sensors.iter().zip(&target.sensors).enumerate();
    let mut plan: Vec<UuvStep> = pairs().filter(|(_, (c, t))| !**c && **t).map(|(i, _)| UuvStep::SensorOn(i + 1)).collect();
    plan.extend(pairs().filter(|(_, (c, t))| **c && !**t).map(|(i, _)| UuvStep::SensorOff(i + 1)));
    if current.speed != target.speed {
        plan.push(UuvStep::SetSpeed(target.speed));
    }
    Ok(plan)
}

pub fn apply_uuv(config: &UuvConfig, step: &UuvStep) -> UuvConfig {
    let mut c = config.clone();
    match *step {
        UuvStep::SensorOn(i) if (1..=c.sensors.len()).contains(&i) => c.sensors[i - 1] = true,
        UuvStep::SensorOff(i) if (1..=c.sensors.len()).contains(&i) => c.sensors[i - 1] = false,
        UuvStep::SetSpeed(v) => c.speed = v,
        _ => {}
    }
    c
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UuvError {
    #[error("speed 0 gives no mission window; the failsafe configuration is not verified")]
    ZeroSpeedHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UuvRequirements {
    /// Mission window length (m); both bounds are per window.
    #[serde(default = "default_mission")]
    pub mission_length: f64,
    #[serde(default = "default_min_measurements")]
    pub min_measurements: f64,
    #[serde(default = "default_max_energy")]
    pub max_energy: f64,
}

fn default_mission() -> f64 {
    10.0
}
fn default_min_measurements() -> f64 {
    20.0
}
fn default_max_energy() -> f64 {
    120.0
}

impl Default for UuvRequirements {
    fn default() -> Self {
        UuvRequirements { mission_length: 10.0, min_measurements: 20.0, max_energy: 120.0 }
    }
}

impl UuvRequirements {
    pub fn horizon(&self, speed: f64) -> Result<f64, UuvError> {
        if speed <= 0.0 {
            return Err(UuvError::ZeroSpeedHorizon);
        }
        Ok(self.mission_length / speed)
    }

    /// R1 and R2 for a configuration moving at `speed`.
    pub fn properties(&self, speed: f64) -> Result<Vec<Property>, UuvError> {
        let horizon = self.horizon(speed)?;
        Ok(vec![
            Property::CumulReward { reward: "measure".into(), bound: Comparison::Ge, threshold: self.min_measurements, horizon },
            Property::CumulReward { reward: "energy".into(), bound: Comparison::Le, threshold: self.max_energy, horizon },
        ])
    }
}

/// w1 * E + w2 / sp.
pub fn uuv_cost(energy: f64, speed: f64, weights: (f64, f64)) -> f64 {
    weights.0 * energy + weights.1 / speed
}

/// Verification problem for fixed sensor rates.
#[derive(Debug, Clone)]
pub struct UuvSystem {
    pub sensors: Vec<SensorSpec>,
    pub templates: Vec<ModelTemplate>,
    pub rates: Vec<f64>,
    pub requirements: UuvRequirements,
}

impl UuvSystem {
    pub fn new(sensors: Vec<SensorSpec>, rates: Vec<f64>, requirements: UuvRequirements) -> Self {
        let templates = sensors.iter().map(build_sensor_template).collect();
        UuvSystem { sensors, templates, rates, requirements }
    }

    pub fn sensor_model(&self, i: usize, speed: f64) -> Result<MarkovModel, VerifyError> {
        let b: BTreeMap<String, f64> = [("r".to_string(), self.rates[i]), ("sp".to_string(), speed)].into();
        self.templates[i].bind(&b).map_err(|e| VerifyError::Model(format!("{}: {e}", self.sensors[i].name)))
    }

    /// Switching energy charged per window: on-energy for active sensors,
    /// off-energy for the others.
    pub fn switching_energy(&self, config: &UuvConfig) -> f64 {
        self.sensors.iter().zip(&config.sensors).map(|(s, on)| if *on { s.energy_on } else { s.energy_off }).sum()
    }
}

impl ParametricSystem for UuvSystem {
    type Config = UuvConfig;

    fn subject(&self, config: &UuvConfig) -> Result<Subject, VerifyError> {
        let models = config.active().map(|i| self.sensor_model(i, config.speed)).collect::<Result<Vec<_>, _>>()?;
        let offsets = [("energy".to_string(), self.switching_energy(config))].into();
        Ok(Subject::Parallel { sum: IndependentSum::new(models), offsets })
    }

    fn properties(&self, config: &UuvConfig) -> Result<Vec<Property>, VerifyError> {
        self.requirements.properties(config.speed).map_err(|_| VerifyError::InvalidHorizon(f64::INFINITY))
    }
}

/// The UUV as a managed application.
#[derive(Debug, Clone)]
pub struct Uuv {
    pub sensors: Vec<SensorSpec>,
    pub requirements: UuvRequirements,
    pub configs: Vec<UuvConfig>,
}

impl Uuv {
    pub fn new(sensors: Vec<SensorSpec>, requirements: UuvRequirements, speeds: &[f64]) -> Self {
        let configs = enumerate_uuv_configs(sensors.len(), speeds);
        Uuv { sensors, requirements, configs }
    }

    pub fn calibrated() -> Self {
        Uuv::new(default_sensors(), UuvRequirements::default(), &speed_grid(1.0, 5.0, 21))
    }

    pub fn rate_parameter(i: usize) -> String {
        format!("r{}", i + 1)
    }

    /// Observations holding each sensor's nominal rate.
    pub fn nominal_observations(&self) -> BTreeMap<String, f64> {
        self.sensors.iter().enumerate().map(|(i, s)| (Self::rate_parameter(i), s.rate)).collect()
    }

    pub fn initial_config(&self) -> UuvConfig {
        UuvConfig { sensors: vec![false; self.sensors.len()], speed: 0.0 }
    }

    pub fn rates_from(&self, observations: &BTreeMap<String, f64>) -> Result<Vec<f64>, String> {
        (0..self.sensors.len())
            .map(|i| {
                let p = Self::rate_parameter(i);
                observations.get(&p).copied().ok_or_else(|| format!("no observation for `{p}`"))
            })
            .collect()
    }
}

impl Application for Uuv {
    type Config = UuvConfig;
    type Step = UuvStep;
    type System = UuvSystem;

    fn name(&self) -> &str {
        "uuv"
    }

    fn sensed_parameters(&self) -> Vec<String> {
        (0..self.sensors.len()).map(Self::rate_parameter).collect()
    }

    fn configurations(&self) -> &[UuvConfig] {
        &self.configs
    }

    fn system(&self, observations: &BTreeMap<String, f64>) -> Result<UuvSystem, String> {
        Ok(UuvSystem::new(self.sensors.clone(), self.rates_from(observations)?, self.requirements.clone()))
    }

    fn property_names(&self) -> Vec<String> {
        vec!["R1".into(), "R2".into()]
    }

    fn cost(&self, config: &UuvConfig, values: &[f64], weights: (f64, f64)) -> f64 {
        uuv_cost(values[1], config.speed, weights)
    }

    fn failsafe(&self, current: &UuvConfig) -> UuvConfig {
        UuvConfig { sensors: current.sensors.clone(), speed: 0.0 }
    }

    fn plan(&self, current: &UuvConfig, target: &UuvConfig) -> Result<Vec<UuvStep>, PlanError> {
        plan_uuv(current, target)
    }

    fn apply(&self, config: &UuvConfig, step: &UuvStep) -> UuvConfig {
        apply_uuv(config, step)
    }

    fn requirements(&self) -> Vec<RequirementSpec> {
        let r = &self.requirements;
        let m = r.mission_length;
        vec![
            RequirementSpec::runtime("R1", &format!("at least {} accurate measurements per {m} m", r.min_measurements)),
            RequirementSpec::runtime("R2", &format!("at most {} J of sensor energy per {m} m", r.max_energy)),
            RequirementSpec::runtime("R3", "the feasible configuration minimising the weighted energy and speed cost is used"),
            RequirementSpec::design_time(
                "R4",
                "speed is reduced to 0 m/s when no feasible configuration is found within the analysis deadline",
            ),
        ]
    }
}

/// Shipped controller network for the vehicle.
pub const CONTROLLER_NETWORK: &str = include_str!("../../data/uuv_controller.toml");
