use std::time::Duration;

use super::*;
use crate::gsn::{instantiate_partial, load_pattern, DesignEvidence, Stage};
use crate::uuv::{Uuv, UuvConfig, UuvStep};

fn design() -> DesignEvidence {
    let ids = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "R4"];
    DesignEvidence {
        report_digest: format!("sha256:{}", "cd".repeat(32)),
        verdicts: ids.iter().map(|p| (p.to_string(), true)).collect(),
    }
}

fn knowledge(app: &Uuv) -> Knowledge<UuvConfig> {
    let initial = app.initial_config();
    let partial = instantiate_partial(&load_pattern(), app.name(), &app.requirements(), &design(), &initial.to_string()).unwrap();
    Knowledge::new(initial, (1.0, 200.0), partial)
}

#[derive(Default)]
struct Recorder {
    applied: Vec<UuvStep>,
    reject_speed: bool,
}

impl Effector<UuvStep> for Recorder {
    fn apply(&mut self, step: &UuvStep) -> Result<(), String> {
        if self.reject_speed && matches!(step, UuvStep::SetSpeed(_)) {
            return Err("actuator jammed".into());
        }
        self.applied.push(*step);
        Ok(())
    }
}

fn event(time: f64, changes: &[(&str, f64)]) -> ChangeEvent {
    ChangeEvent { time, label: format!("t{time}"), changes: changes.iter().map(|(p, v)| (p.to_string(), *v)).collect() }
}

fn seeded(app: &Uuv) -> Knowledge<UuvConfig> {
    let mut k = knowledge(app);
    for (p, v) in app.nominal_observations() {
        monitor_step(app, &mut k, &p, v, 0.0).unwrap();
    }
    k
}

#[test]
fn degraded_rate_triggers_analysis() {
    let app = Uuv::calibrated();
    let mut k = seeded(&app);
    assert_eq!(monitor_step(&app, &mut k, "r3", 1.0, 1.0), Ok(MonitorOutcome::AnalysisTriggered));
    assert_eq!(monitor_step(&app, &mut k, "r3", 1.0, 2.0), Ok(MonitorOutcome::NoAction));
    assert_eq!(monitor_step(&app, &mut k, "r2", 4.0, 2.0), Ok(MonitorOutcome::NoAction));
    // Just under and at the 1% threshold.
    assert_eq!(monitor_step(&app, &mut k, "r1", 5.0 * 1.0099, 3.0), Ok(MonitorOutcome::NoAction));
    assert_eq!(monitor_step(&app, &mut k, "r2", 4.0 * 1.011, 3.0), Ok(MonitorOutcome::AnalysisTriggered));
}

#[test]
fn reliability_change_triggers_analysis() {
    let app = crate::fx::Fx::calibrated();
    let initial = app.initial_config();
    let partial = instantiate_partial(&load_pattern(), "fx", &app.requirements(), &design(), &initial.to_string()).unwrap();
    let mut k = Knowledge::new(initial, (1.0, 2.0), partial);
    monitor_step(&app, &mut k, "p_MW0", 0.9, 0.0).unwrap();
    assert_eq!(monitor_step(&app, &mut k, "p_MW0", 0.976, 1.0), Ok(MonitorOutcome::AnalysisTriggered));
}

#[test]
fn monitor_rejects_unknown_and_stale() {
    let app = Uuv::calibrated();
    let mut k = seeded(&app);
    assert_eq!(monitor_step(&app, &mut k, "r9", 1.0, 1.0), Err(MonitorError::UnknownParameter("r9".into())));
    monitor_step(&app, &mut k, "r1", 5.0, 10.0).unwrap();
    assert!(matches!(monitor_step(&app, &mut k, "r1", 2.0, 5.0), Err(MonitorError::StaleTimestamp { .. })));
    assert_eq!(k.observations["r1"].value, 5.0);
}

#[test]
fn zero_budget_forces_failsafe() {
    let app = Uuv::calibrated();
    let mut k = seeded(&app);
    k.current = UuvConfig::new(&[0, 1, 1], 2.8);
    let a = analyze(&app, &k, &Deadline::after(Duration::ZERO), None);
    match &a.decision {
        Decision::Failsafe { target, reason: FailsafeReason::DeadlineExceeded { verified: 0, total: 147 } } => {
            assert_eq!(target, &UuvConfig::new(&[0, 1, 1], 0.0));
        }
        d => panic!("unexpected decision {d:?}"),
    }
    let table = EvidenceTable::build(&app, &a);
    assert_eq!(table.rows.len(), 1);
    assert!(table.failsafe_digest().is_some());
}

#[test]
fn optimum_in_place_is_kept() {
    let app = Uuv::calibrated();
    let mut k = seeded(&app);
    let first = analyze(&app, &k, &Deadline::none(), None);
    let Decision::Adapt { target } = first.decision.clone() else { panic!("expected adaptation") };
    assert_eq!(target, UuvConfig::new(&[0, 1, 1], 2.8));
    assert_eq!(first.feasible_count(), EvidenceTable::build(&app, &first).feasible_rows());
    k.current = target;
    assert_eq!(analyze(&app, &k, &Deadline::none(), None).decision, Decision::Keep);
}

#[test]
fn infeasible_environment_is_failsafe() {
    let app = Uuv::calibrated();
    let mut k = seeded(&app);
    for p in ["r1", "r2", "r3"] {
        monitor_step(&app, &mut k, p, 0.01, 1.0).unwrap();
    }
    let a = analyze(&app, &k, &Deadline::none(), None);
    assert!(matches!(a.decision, Decision::Failsafe { reason: FailsafeReason::NoFeasibleConfiguration { verified: 147 }, .. }));
}

#[test]
fn empty_plan_is_a_no_op() {
    let app = Uuv::calibrated();
    let mut k = seeded(&app);
    let mut fx = Recorder::default();
    let before = k.current.clone();
    assert_eq!(execute(&app, &mut k, &[], &mut fx), Ok(before.clone()));
    assert!(fx.applied.is_empty());
    assert_eq!(k.current, before);
}

#[test]
fn rejected_step_leaves_partial_configuration() {
    let app = Uuv::calibrated();
    let mut k = knowledge(&app);
    let mut eff = Recorder { reject_speed: true, ..Default::default() };
    let opts = LoopOptions { max_retries: 1, ..LoopOptions::new() };
    let nominal: Vec<(String, f64)> = app.nominal_observations().into_iter().collect();
    handle_event(&app, &mut k, &mut eff, &ChangeEvent { time: 0.0, label: "A".into(), changes: nominal }, &opts);
    // The first attempt switches the sensors on and fails at SetSpeed;
    // the retry only needs the speed change and fails again.
    assert_eq!(k.log.len(), 2);
    assert!(k.log.iter().all(|r| r.errors.iter().any(|e| e.contains("actuator jammed"))));
    assert!(k.log.iter().all(|r| r.argument_version.is_none()));
    assert_eq!(k.current, UuvConfig::new(&[0, 1, 1], 0.0));
    assert_eq!(k.log[1].plan, vec!["SetSpeed(2.8)"]);
}

#[test]
fn accepted_plan_produces_full_argument() {
    let app = Uuv::calibrated();
    let mut k = knowledge(&app);
    let mut eff = Recorder::default();
    let nominal: Vec<(String, f64)> = app.nominal_observations().into_iter().collect();
    handle_event(&app, &mut k, &mut eff, &ChangeEvent { time: 0.0, label: "A".into(), changes: nominal }, &LoopOptions::new());
    let rec = &k.log[0];
    assert_eq!(rec.decision.kind(), "adapt");
    assert_eq!(rec.argument_version, Some(1));
    let arg = k.arguments.latest().unwrap();
    assert_eq!(arg.stage, Stage::Full);
    assert!(arg.validate().is_valid(), "{}", arg.validate());
    assert_eq!(arg.context_configuration(), Some("(0, 1, 1, 2.8)"));
    let table = rec.evidence.as_ref().unwrap();
    for (_, digest) in arg.evidence_refs() {
        if digest.starts_with("sha256:cdcd") {
            continue;
        }
        assert!(table.resolve(digest).is_some());
    }
    // A repeat of the same observations changes nothing.
    handle_event(&app, &mut k, &mut eff, &event(1.0, &[("r1", 5.0)]), &LoopOptions::new());
    assert!(!k.log[1].triggered);
    assert_eq!(k.arguments.len(), 1);
}

struct Empty;

impl EventSource for Empty {
    fn next_event(&mut self) -> Option<ChangeEvent> {
        None
    }
}

impl Effector<UuvStep> for Empty {
    fn apply(&mut self, _: &UuvStep) -> Result<(), String> {
        Ok(())
    }
}

#[test]
fn empty_event_stream() {
    let app = Uuv::calibrated();
    let mut k = knowledge(&app);
    assert!(run_loop(&app, &mut k, &mut Empty, &LoopOptions::new()).is_empty());
    assert_eq!(k.current, app.initial_config());
}

#[test]
fn evidence_csv_round_trip() {
    let app = Uuv::calibrated();
    let k = seeded(&app);
    let a = analyze(&app, &k, &Deadline::none(), None);
    let t = EvidenceTable::build(&app, &a);
    let back = EvidenceTable::from_csv(&t.to_csv().unwrap()).unwrap();
    assert_eq!(back, t);
    assert_eq!(t.header[..5], ["config", "x1", "x2", "x3", "sp"]);
}
