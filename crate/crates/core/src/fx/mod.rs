//! Foreign-exchange trading workflow composed of six web-service
//! operations. A parametric DTMC captures the workflow; service selection
//! trades price against response time subject to reliability and time bounds.

mod scenario;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scenario::{FxEvent, FxScenario, FxSimulator, FxTraceRow};

use crate::expr::Expr;
use crate::gsn::RequirementSpec;
use crate::mape::{Application, PlanError};
use crate::model::{ModelKind, ModelTemplate, Parameter};
use crate::verifier::{Comparison, ConfigRecord, ParametricSystem, Property, Subject, VerifyError};

/// Service id marking a bypassed Order invocation.
pub const NO_SERVICE: &str = "NoSvc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operation {
    #[serde(rename = "MW")]
    MarketWatch,
    #[serde(rename = "TA")]
    TechnicalAnalysis,
    #[serde(rename = "FA")]
    FundamentalAnalysis,
    #[serde(rename = "Al")]
    Alarm,
    #[serde(rename = "Or")]
    Order,
    #[serde(rename = "No")]
    Notification,
}

impl Operation {
    /// Workflow order; also the digit order of configuration indices.
    pub const ALL: [Operation; 6] = [
        Operation::MarketWatch,
        Operation::TechnicalAnalysis,
        Operation::FundamentalAnalysis,
        Operation::Alarm,
        Operation::Order,
        Operation::Notification,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Operation::MarketWatch => "MW",
            Operation::TechnicalAnalysis => "TA",
            Operation::FundamentalAnalysis => "FA",
            Operation::Alarm => "Al",
            Operation::Order => "Or",
            Operation::Notification => "No",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Operation::MarketWatch => "MarketWatch",
            Operation::TechnicalAnalysis => "TechnicalAnalysis",
            Operation::FundamentalAnalysis => "FundamentalAnalysis",
            Operation::Alarm => "Alarm",
            Operation::Order => "Order",
            Operation::Notification => "Notification",
        }
    }

    pub fn position(self) -> usize {
        Self::ALL.iter().position(|o| *o == self).expect("listed")
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub id: String,
    pub operation: Operation,
    /// Response time (s).
    pub time: f64,
    pub reliability: f64,
    pub price: f64,
}

impl ServiceSpec {
    pub fn parameter_names(id: &str) -> [String; 3] {
        [format!("p_{id}"), format!("time_{id}"), format!("price_{id}")]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("cannot read registry: {0}")]
    Io(String),
    #[error("malformed registry: {0}")]
    Parse(String),
    #[error("service `{0}` is registered twice")]
    DuplicateService(String),
    #[error("no implementation registered for {0}")]
    MissingOperation(Operation),
    #[error("service `{0}` has out-of-range characteristics")]
    InvalidService(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceRegistry {
    pub services: Vec<ServiceSpec>,
}

impl ServiceRegistry {
    pub fn from_toml(text: &str) -> Result<Self, RegistryError> {
        let r: ServiceRegistry = toml::from_str(text).map_err(|e| RegistryError::Parse(e.to_string()))?;
        r.check()?;
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RegistryError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Two implementations per operation with their published characteristics.
    pub fn default_table() -> Self {
        Self::from_toml(include_str!("../../data/fx_registry.toml")).expect("shipped registry is valid")
    }

    pub fn check(&self) -> Result<(), RegistryError> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.services {
            if !seen.insert(s.id.as_str()) || s.id == NO_SERVICE {
                return Err(RegistryError::DuplicateService(s.id.clone()));
            }
            let ok = (0.0..=1.0).contains(&s.reliability)
                && s.time >= 0.0
                && s.price >= 0.0
                && s.time.is_finite()
                && s.price.is_finite();
            if !ok {
                return Err(RegistryError::InvalidService(s.id.clone()));
            }
        }
        for op in Operation::ALL {
            if self.implementations(op).is_empty() {
                return Err(RegistryError::MissingOperation(op));
            }
        }
        Ok(())
    }

    /// Implementations of `op` in registration order.
    pub fn implementations(&self, op: Operation) -> Vec<&ServiceSpec> {
        self.services.iter().filter(|s| s.operation == op).collect()
    }

    pub fn service(&self, id: &str) -> Option<&ServiceSpec> {
        self.services.iter().find(|s| s.id == id)
    }

    /// Observations holding every service's registered characteristics.
    pub fn observations(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for s in &self.services {
            let [p, t, c] = ServiceSpec::parameter_names(&s.id);
            m.insert(p, s.reliability);
            m.insert(t, s.time);
            m.insert(c, s.price);
        }
        m
    }
}

/// Selected service id per operation, in [`Operation::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FxConfig {
    pub services: Vec<String>,
}

impl FxConfig {
    pub fn new(ids: &[&str]) -> Self {
        FxConfig { services: ids.iter().map(|s| s.to_string()).collect() }
    }

    pub fn service(&self, op: Operation) -> &str {
        &self.services[op.position()]
    }

    pub fn is_failsafe(&self) -> bool {
        self.service(Operation::Order) == NO_SERVICE
    }
}

impl fmt::Display for FxConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.services.join(", "))
    }
}

impl ConfigRecord for FxConfig {
    fn field_names(&self) -> Vec<String> {
        Operation::ALL.iter().map(|o| o.code().to_string()).collect()
    }

    fn field_values(&self) -> Vec<String> {
        self.services.clone()
    }
}

/// Full cross product of implementations, ordered by the mixed-radix index
/// whose most significant digit is the MarketWatch choice.
pub fn enumerate_fx_configs(registry: &ServiceRegistry) -> Vec<FxConfig> {
    let impls: Vec<Vec<&ServiceSpec>> = Operation::ALL.iter().map(|&o| registry.implementations(o)).collect();
    let total: usize = impls.iter().map(Vec::len).product();
    (0..total).map(|i| config_from_index(&impls, i)).collect()
}

fn config_from_index(impls: &[Vec<&ServiceSpec>], mut index: usize) -> FxConfig {
    let mut ids = vec![String::new(); impls.len()];
    for k in (0..impls.len()).rev() {
        let radix = impls[k].len();
        ids[k] = impls[k][index % radix].id.clone();
        index /= radix;
    }
    FxConfig { services: ids }
}

/// Index of `config` in [`enumerate_fx_configs`] order; `None` for a
/// bypassed Order or an unknown service.
pub fn fx_index(registry: &ServiceRegistry, config: &FxConfig) -> Option<usize> {
    let mut index = 0;
    for op in Operation::ALL {
        let impls = registry.implementations(op);
        let digit = impls.iter().position(|s| s.id == config.service(op))?;
        index = index * impls.len() + digit;
    }
    Some(index)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkflowError {
    #[error("{0} must be a probability")]
    NotProbability(&'static str),
    #[error("technical analysis outcomes sum to {0}, not 1")]
    OutcomeSum(f64),
    #[error("the analysis loop has no escape")]
    NoEscape,
}

/// Branch probabilities of the workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowParams {
    /// Share of executions in expert mode (MarketWatch/TechnicalAnalysis loop).
    pub expert: f64,
    pub ta_satisfied: f64,
    pub ta_unsatisfied: f64,
    pub ta_high_variance: f64,
    /// Probability that fundamental analysis leads to an order.
    pub fa_proceed: f64,
}

impl Default for WorkflowParams {
    fn default() -> Self {
        WorkflowParams { expert: 0.8, ta_satisfied: 0.25, ta_unsatisfied: 0.6, ta_high_variance: 0.15, fa_proceed: 0.5 }
    }
}

impl WorkflowParams {
    pub fn check(&self) -> Result<(), WorkflowError> {
        let probs = [
            ("expert", self.expert),
            ("ta_satisfied", self.ta_satisfied),
            ("ta_unsatisfied", self.ta_unsatisfied),
            ("ta_high_variance", self.ta_high_variance),
            ("fa_proceed", self.fa_proceed),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(WorkflowError::NotProbability(name));
            }
        }
        let sum = self.ta_satisfied + self.ta_unsatisfied + self.ta_high_variance;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(WorkflowError::OutcomeSum(sum));
        }
        if self.expert > 0.0 && self.ta_satisfied <= 0.0 {
            return Err(WorkflowError::NoEscape);
        }
        Ok(())
    }
}

fn op_params(op: Operation) -> [String; 3] {
    let c = op.code();
    [format!("p_{c}"), format!("time_{c}"), format!("price_{c}")]
}

/// Parametric workflow DTMC with per-operation parameters p_X, time_X and
/// price_X, reward structures `time` and `price`, and labels `done`,
/// `fail` and `end` (either of the two).
pub fn build_fx_template(params: &WorkflowParams) -> Result<ModelTemplate, WorkflowError> {
    params.check()?;
    let states = ["start", "MW", "TA", "TAr", "Al", "FA", "FAr", "Or", "No", "done", "fail"];
    let mut t = ModelTemplate::new(ModelKind::Dtmc, states.iter().map(|s| s.to_string()).collect());
    for op in Operation::ALL {
        let [p, time, price] = op_params(op);
        t.declare(Parameter::probability(&p))
            .declare(Parameter::non_negative(&time, "s"))
            .declare(Parameter::non_negative(&price, ""));
    }
    let num = Expr::Num;
    let id = |s: &str| Expr::Ident(s.to_string());
    let fail = |p: &str| Expr::parse(&format!("1 - {p}")).expect("valid");
    let mut tr = |a: &str, b: &str, w: Expr| {
        t.transition(a, b, w).expect("state exists");
    };
    tr("start", "MW", num(params.expert));
    tr("start", "FA", num(1.0 - params.expert));
    for (op, next) in [
        (Operation::MarketWatch, "TA"),
        (Operation::TechnicalAnalysis, "TAr"),
        (Operation::Alarm, "MW"),
        (Operation::FundamentalAnalysis, "FAr"),
        (Operation::Order, "No"),
        (Operation::Notification, "done"),
    ] {
        let [p, _, _] = op_params(op);
        tr(op.code(), next, id(&p));
        tr(op.code(), "fail", fail(&p));
    }
    tr("TAr", "Or", num(params.ta_satisfied));
    tr("TAr", "MW", num(params.ta_unsatisfied));
    tr("TAr", "Al", num(params.ta_high_variance));
    tr("FAr", "Or", num(params.fa_proceed));
    tr("FAr", "done", num(1.0 - params.fa_proceed));
    tr("done", "done", num(1.0));
    tr("fail", "fail", num(1.0));
    for op in Operation::ALL {
        let [_, time, price] = op_params(op);
        t.state_reward("time", op.code(), id(&time)).expect("state exists");
        t.state_reward("price", op.code(), id(&price)).expect("state exists");
    }
    t.label("done", &["done"]).expect("state exists");
    t.label("fail", &["fail"]).expect("state exists");
    t.label("end", &["done", "fail"]).expect("state exists");
    Ok(t)
}

/// Template bindings for `config` under the observed service
/// characteristics. A bypassed Order succeeds instantly and for free.
pub fn fx_bindings(config: &FxConfig, observations: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>, String> {
    let mut b = BTreeMap::new();
    for op in Operation::ALL {
        let [p, time, price] = op_params(op);
        let sid = config.service(op);
        if sid == NO_SERVICE {
            if op != Operation::Order {
                return Err(format!("{op} cannot be bypassed"));
            }
            b.insert(p, 1.0);
            b.insert(time, 0.0);
            b.insert(price, 0.0);
            continue;
        }
        for (name, obs) in [p, time, price].into_iter().zip(ServiceSpec::parameter_names(sid)) {
            let v = observations.get(&obs).copied().ok_or_else(|| format!("no observation for `{obs}`"))?;
            b.insert(name, v);
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FxRequirements {
    #[serde(default = "default_reliability")]
    pub min_success: f64,
    #[serde(default = "default_time")]
    pub max_time: f64,
}

fn default_reliability() -> f64 {
    0.9
}
fn default_time() -> f64 {
    5.0
}

impl Default for FxRequirements {
    fn default() -> Self {
        FxRequirements { min_success: 0.9, max_time: 5.0 }
    }
}

impl FxRequirements {
    /// R1, R2 and the unbounded price query used by the cost.
    pub fn properties(&self) -> Vec<Property> {
        vec![
            Property::ProbReach { bound: Comparison::Ge, threshold: self.min_success, target: "done".into() },
            Property::ReachReward {
                reward: "time".into(),
                bound: Comparison::Le,
                threshold: self.max_time,
                target: "end".into(),
            },
            Property::ReachReward { reward: "price".into(), bound: Comparison::Query, threshold: 0.0, target: "end".into() },
        ]
    }
}

/// w1 * price + w2 * time.
pub fn fx_cost(price: f64, time: f64, weights: (f64, f64)) -> f64 {
    weights.0 * price + weights.1 * time
}

#[derive(Debug, Clone)]
pub struct FxSystem {
    pub template: ModelTemplate,
    pub observations: BTreeMap<String, f64>,
    pub requirements: FxRequirements,
}

impl ParametricSystem for FxSystem {
    type Config = FxConfig;

    fn subject(&self, config: &FxConfig) -> Result<Subject, VerifyError> {
        let b = fx_bindings(config, &self.observations).map_err(VerifyError::Model)?;
        self.template.bind(&b).map(Subject::Single).map_err(|e| VerifyError::Model(e.to_string()))
    }

    fn properties(&self, _: &FxConfig) -> Result<Vec<Property>, VerifyError> {
        Ok(self.requirements.properties())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FxStep {
    pub operation: Operation,
    pub service: String,
}

impl fmt::Display for FxStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChangeService({}, {})", self.operation, self.service)
    }
}

pub fn plan_fx(current: &FxConfig, target: &FxConfig) -> Result<Vec<FxStep>, PlanError> {
    if current == target {
        return Err(PlanError::SameConfiguration);
    }
    Ok(Operation::ALL
        .iter()
        .filter(|&&op| current.service(op) != target.service(op))
        .map(|&op| FxStep { operation: op, service: target.service(op).to_string() })
        .collect())
}

pub fn apply_fx(config: &FxConfig, step: &FxStep) -> FxConfig {
    let mut c = config.clone();
    c.services[step.operation.position()] = step.service.clone();
    c
}

#[derive(Debug, Clone)]
pub struct Fx {
    pub registry: ServiceRegistry,
    pub params: WorkflowParams,
    pub requirements: FxRequirements,
    pub template: ModelTemplate,
    pub configs: Vec<FxConfig>,
}

impl Fx {
    pub fn new(registry: ServiceRegistry, params: WorkflowParams, requirements: FxRequirements) -> Result<Self, WorkflowError> {
        let template = build_fx_template(&params)?;
        let configs = enumerate_fx_configs(&registry);
        Ok(Fx { registry, params, requirements, template, configs })
    }

    pub fn calibrated() -> Self {
        Fx::new(ServiceRegistry::default_table(), WorkflowParams::default(), FxRequirements::default())
            .expect("default workflow parameters are valid")
    }

    pub fn index(&self, config: &FxConfig) -> Option<usize> {
        fx_index(&self.registry, config)
    }

    /// First enumerated configuration with Order bypassed.
    pub fn initial_config(&self) -> FxConfig {
        self.failsafe(&self.configs[0])
    }
}

impl Application for Fx {
    type Config = FxConfig;
    type Step = FxStep;
    type System = FxSystem;

    fn name(&self) -> &str {
        "fx"
    }

    fn sensed_parameters(&self) -> Vec<String> {
        self.registry.services.iter().flat_map(|s| ServiceSpec::parameter_names(&s.id)).collect()
    }

    fn configurations(&self) -> &[FxConfig] {
        &self.configs
    }

    fn system(&self, observations: &BTreeMap<String, f64>) -> Result<FxSystem, String> {
        Ok(FxSystem {
            template: self.template.clone(),
            observations: observations.clone(),
            requirements: self.requirements.clone(),
        })
    }

    fn property_names(&self) -> Vec<String> {
        vec!["R1".into(), "R2".into(), "price".into()]
    }

    fn cost(&self, _: &FxConfig, values: &[f64], weights: (f64, f64)) -> f64 {
        fx_cost(values[2], values[1], weights)
    }

    fn failsafe(&self, current: &FxConfig) -> FxConfig {
        let mut c = current.clone();
        c.services[Operation::Order.position()] = NO_SERVICE.into();
        c
    }

    fn plan(&self, current: &FxConfig, target: &FxConfig) -> Result<Vec<FxStep>, PlanError> {
        plan_fx(current, target)
    }

    fn apply(&self, config: &FxConfig, step: &FxStep) -> FxConfig {
        apply_fx(config, step)
    }

    fn requirements(&self) -> Vec<RequirementSpec> {
        let r = &self.requirements;
        vec![
            RequirementSpec::runtime(
                "R1",
                &format!("workflow executions complete successfully with probability at least {}", r.min_success),
            ),
            RequirementSpec::runtime("R2", &format!("expected workflow response time is at most {} s", r.max_time)),
            RequirementSpec::runtime("R3", "the feasible service selection minimising the weighted price and time cost is used"),
            RequirementSpec::design_time(
                "R4",
                "the Order invocation is bypassed when no feasible selection is found within the analysis deadline",
            ),
        ]
    }
}

/// Shipped controller network for the workflow.
pub const CONTROLLER_NETWORK: &str = include_str!("../../data/fx_controller.toml");
