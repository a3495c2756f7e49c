mod common;

use std::collections::BTreeMap;

use common::uuv_oracle;
use dynassure::deadline::Deadline;
use dynassure::fx::{build_fx_template, fx_bindings, Fx, FxConfig, FxRequirements, Operation, WorkflowParams};
use dynassure::model::ModelTemplate;
use dynassure::uuv::{default_sensors, enumerate_uuv_configs, speed_grid, Uuv, UuvConfig, UuvRequirements, UuvSystem};
use dynassure::verifier::{
    dtmc_expected_reward, dtmc_reach_probability, evaluate_subject, verify_config_space, ParametricSystem,
};
use proptest::prelude::*;

#[test]
fn uuv_enumeration_size() {
    for n in 1..=6 {
        for count in [1, 3, 21] {
            let grid = speed_grid(1.0, 5.0, count);
            assert_eq!(enumerate_uuv_configs(n, &grid).len(), ((1 << n) - 1) * grid.len());
        }
    }
}

/// Keeping (0,1,1,2.8) after sensor 3 degrades to one measurement per second
/// leaves roughly 13 accurate measurements per window.
#[test]
fn non_adaptive_baseline_misses_r1() {
    let sys = UuvSystem::new(default_sensors(), vec![5.0, 4.0, 1.0], UuvRequirements::default());
    let c = UuvConfig::new(&[0, 1, 1], 2.8);
    let subject = sys.subject(&c).unwrap();
    let r1 = &sys.properties(&c).unwrap()[0];
    let v = evaluate_subject(&subject, r1, &Deadline::none()).unwrap();
    assert_eq!(v.satisfied, Some(false));
    assert!((v.value - 13.0).abs() <= 2.0, "R1 = {}", v.value);
}

#[test]
fn uuv_feasible_members_recheck_individually() {
    let uuv = Uuv::calibrated();
    let req = UuvRequirements::default();
    for rates in [vec![5.0, 4.0, 4.0], vec![5.0, 4.0, 1.0], vec![5.0, 0.5, 0.5]] {
        let sys = UuvSystem::new(uuv.sensors.clone(), rates.clone(), req.clone());
        let batch = verify_config_space(&sys, &uuv.configs, &Deadline::none());
        assert_eq!(batch.entries.len(), uuv.configs.len());
        for e in batch.feasible() {
            let (measure, energy) = uuv_oracle(&uuv.sensors, &rates, &req, &e.config);
            let tol = 1e-6 * measure.max(energy);
            assert!(measure >= req.min_measurements - tol, "{}: {measure}", e.config);
            assert!(energy <= req.max_energy + tol, "{}: {energy}", e.config);
        }
    }
}

/// With perfect services and no loop back to Market Watch, each branch is
/// a straight path.
#[test]
fn perfect_services_time_is_path_weighted() {
    let fx = Fx::calibrated();
    let mut obs = fx.registry.observations();
    for (k, v) in obs.iter_mut() {
        if k.starts_with("p_") {
            *v = 1.0;
        }
    }
    for (e, f) in [(0.3, 0.7), (1.0, 0.2), (0.0, 1.0), (0.55, 0.0)] {
        let params = WorkflowParams { expert: e, ta_satisfied: 1.0, ta_unsatisfied: 0.0, ta_high_variance: 0.0, fa_proceed: f };
        let t = build_fx_template(&params).unwrap();
        for c in &fx.configs {
            let m = t.bind(&fx_bindings(c, &obs).unwrap()).unwrap();
            let time = |op: Operation| obs[&format!("time_{}", c.service(op))];
            let order = time(Operation::Order) + time(Operation::Notification);
            let expert = time(Operation::MarketWatch) + time(Operation::TechnicalAnalysis) + order;
            let normal = time(Operation::FundamentalAnalysis) + f * order;
            let want = e * expert + (1.0 - e) * normal;
            assert!((dtmc_expected_reward(&m, "time", "end").unwrap() - want).abs() < 1e-9, "{c}");
        }
    }
}

fn r1_holds(template: &ModelTemplate, c: &FxConfig, obs: &BTreeMap<String, f64>) -> bool {
    let m = template.bind(&fx_bindings(c, obs).unwrap()).unwrap();
    dtmc_reach_probability(&m, "done").unwrap() >= FxRequirements::default().min_success
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lowering_reliability_never_restores_r1(service in 0usize..12, factor in 0.0f64..1.0, config in 0usize..64) {
        let fx = Fx::calibrated();
        let obs = fx.registry.observations();
        let c = &fx.configs[config];
        let id = &fx.registry.services[service].id;
        let mut lowered = obs.clone();
        *lowered.get_mut(&format!("p_{id}")).unwrap() *= factor;
        if !r1_holds(&fx.template, c, &obs) {
            prop_assert!(!r1_holds(&fx.template, c, &lowered));
        }
    }
}
