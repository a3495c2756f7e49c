use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{evaluate_subject, Property, Subject, VerificationResult, VerifyError};
use crate::deadline::Deadline;
use crate::model::ModelTemplate;

/// Configuration space whose members map to a verification subject and a
/// set of properties.
pub trait ParametricSystem {
    type Config: Clone;

    fn subject(&self, config: &Self::Config) -> Result<Subject, VerifyError>;

    fn properties(&self, config: &Self::Config) -> Result<Vec<Property>, VerifyError>;
}

/// Configurations given as plain parameter bindings of one template.
pub struct TemplateSpace<'a> {
    pub template: &'a ModelTemplate,
    pub properties: Vec<Property>,
}

impl ParametricSystem for TemplateSpace<'_> {
    type Config = BTreeMap<String, f64>;

    fn subject(&self, config: &Self::Config) -> Result<Subject, VerifyError> {
        self.template.bind(config).map(Subject::Single).map_err(|e| VerifyError::Model(e.to_string()))
    }

    fn properties(&self, _: &Self::Config) -> Result<Vec<Property>, VerifyError> {
        Ok(self.properties.clone())
    }
}

/// Named columns describing a configuration in CSV exports.
pub trait ConfigRecord {
    fn field_names(&self) -> Vec<String>;
    fn field_values(&self) -> Vec<String>;
}

impl ConfigRecord for BTreeMap<String, f64> {
    fn field_names(&self) -> Vec<String> {
        self.keys().cloned().collect()
    }

    fn field_values(&self) -> Vec<String> {
        self.values().map(|v| v.to_string()).collect()
    }
}

/// Artificial verification latency used to exercise deadline handling.
#[derive(Clone)]
pub struct LatencyInjection {
    /// Called before the configuration with the given index is verified;
    /// returns how long that verification should be delayed.
    pub delay: Arc<dyn Fn(usize) -> Duration + Send + Sync>,
}

impl LatencyInjection {
    pub fn before(index: usize, duration: Duration) -> Self {
        LatencyInjection { delay: Arc::new(move |i| if i == index { duration } else { Duration::ZERO }) }
    }
}

impl std::fmt::Debug for LatencyInjection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("LatencyInjection")
    }
}

#[derive(Debug, Clone)]
pub struct BatchEntry<C> {
    pub index: usize,
    pub config: C,
    pub results: Result<Vec<VerificationResult>, VerifyError>,
}

impl<C> BatchEntry<C> {
    /// True iff verification succeeded and every bounded property holds.
    pub fn feasible(&self) -> bool {
        match &self.results {
            Ok(rs) => rs.iter().all(|r| r.satisfied != Some(false)),
            Err(_) => false,
        }
    }

    pub fn value(&self, i: usize) -> Option<f64> {
        self.results.as_ref().ok().and_then(|rs| rs.get(i)).map(|r| r.value)
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutcome<C> {
    pub entries: Vec<BatchEntry<C>>,
    /// Set when the deadline elapsed before all configurations were
    /// verified; `entries` then holds the completed prefix.
    pub deadline_exceeded: bool,
    pub elapsed: Duration,
}

impl<C> BatchOutcome<C> {
    pub fn feasible(&self) -> impl Iterator<Item = &BatchEntry<C>> {
        self.entries.iter().filter(|e| e.feasible())
    }

    pub fn entry(&self, index: usize) -> Option<&BatchEntry<C>> {
        self.entries.iter().find(|e| e.index == index)
    }
}

impl<C: ConfigRecord> BatchOutcome<C> {
    /// One row per configuration: configuration fields, one column per
    /// property (named by `property_names`), then `feasible`.
    pub fn write_csv<W: Write>(&self, w: W, property_names: &[&str]) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let Some(first) = self.entries.first() else {
            let mut header: Vec<String> = property_names.iter().map(|s| s.to_string()).collect();
            header.push("feasible".into());
            out.write_record(&header)?;
            return out.flush().map_err(Into::into);
        };
        let mut header = first.config.field_names();
        header.extend(property_names.iter().map(|s| s.to_string()));
        header.push("feasible".into());
        out.write_record(&header)?;
        for e in &self.entries {
            let mut row = e.config.field_values();
            for i in 0..property_names.len() {
                row.push(e.value(i).map(|v| format!("{v}")).unwrap_or_default());
            }
            row.push(e.feasible().to_string());
            out.write_record(&row)?;
        }
        out.flush().map_err(Into::into)
    }
}

pub fn verify_config_space<S: ParametricSystem>(
    system: &S,
    configs: &[S::Config],
    deadline: &Deadline,
) -> BatchOutcome<S::Config> {
    verify_config_space_with(system, configs, deadline, None)
}

/// Verifies every configuration in order. Stops with `deadline_exceeded`
/// once the deadline expires (checked between configurations and inside the
/// CTMC solver). Per-configuration errors are recorded, not propagated.
pub fn verify_config_space_with<S: ParametricSystem>(
    system: &S,
    configs: &[S::Config],
    deadline: &Deadline,
    latency: Option<&LatencyInjection>,
) -> BatchOutcome<S::Config> {
    let started = Instant::now();
    let mut entries = Vec::with_capacity(configs.len());
    let mut exceeded = false;
    for (index, config) in configs.iter().enumerate() {
        if deadline.expired() {
            exceeded = true;
            break;
        }
        if let Some(l) = latency {
            let d = (l.delay)(index);
            if !d.is_zero() && !deadline.sleep(d) {
                exceeded = true;
                break;
            }
        }
        let results = verify_one(system, config, deadline);
        if matches!(results, Err(VerifyError::DeadlineExceeded)) {
            exceeded = true;
            break;
        }
        entries.push(BatchEntry { index, config: config.clone(), results });
    }
    BatchOutcome { entries, deadline_exceeded: exceeded, elapsed: started.elapsed() }
}

fn verify_one<S: ParametricSystem>(
    system: &S,
    config: &S::Config,
    deadline: &Deadline,
) -> Result<Vec<VerificationResult>, VerifyError> {
    let subject = system.subject(config)?;
    let props = system.properties(config)?;
    props.iter().map(|p| evaluate_subject(&subject, p, deadline)).collect()
}
