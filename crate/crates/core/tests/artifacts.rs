mod common;

use std::collections::BTreeMap;

use common::{fx_oracle, ready_occupancy};
use dynassure::fx::{build_fx_template, fx_bindings, Fx, WorkflowParams};
use dynassure::gsn::{
    instantiate_full, instantiate_partial, load_pattern, parse_outline, render, DesignEvidence, EvidenceItem, Format,
    RequirementSpec, RuntimeBinding, Stage,
};
use dynassure::model::{MarkovModel, ModelKind, ModelTemplate};
use dynassure::uuv::generic_sensor_template;
use dynassure::verifier::{ctmc_cumulative_reward, dtmc_expected_reward, dtmc_reach_probability};
use proptest::prelude::*;

const SENSOR_FILE: &str = include_str!("../data/uuv_sensor.toml");
const WORKFLOW_FILE: &str = include_str!("../data/fx_workflow.toml");

#[test]
fn shipped_model_files_match_the_builders() {
    let sensor = ModelTemplate::from_toml(SENSOR_FILE).unwrap();
    assert_eq!(sensor, generic_sensor_template());
    assert_eq!(sensor.to_toml().unwrap(), SENSOR_FILE);
    let workflow = ModelTemplate::from_toml(WORKFLOW_FILE).unwrap();
    assert_eq!(workflow, build_fx_template(&WorkflowParams::default()).unwrap());
    assert_eq!(workflow.to_toml().unwrap(), WORKFLOW_FILE);
}

#[test]
fn sensor_file_binds_to_closed_form() {
    let t = ModelTemplate::from_toml(SENSOR_FILE).unwrap();
    for (r, p, e, horizon) in [(5.0, 0.9, 2.0, 3.0), (1.0, 0.5, 0.1, 10.0), (3.5, 1.0, 7.0, 2.0)] {
        let b: BTreeMap<String, f64> = [("r", r), ("p", p), ("e", e)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let m = t.bind(&b).unwrap();
        let visits = r * ready_occupancy(r, horizon);
        let measure = ctmc_cumulative_reward(&m, "measure", horizon).unwrap();
        let energy = ctmc_cumulative_reward(&m, "energy", horizon).unwrap();
        assert!((measure - p * visits).abs() <= 1e-6 * visits.max(1.0), "{measure} vs {}", p * visits);
        assert!((energy - e * visits).abs() <= 1e-6 * (e * visits).max(1.0), "{energy} vs {}", e * visits);
    }
}

#[test]
fn workflow_file_binds_to_closed_form() {
    let fx = Fx::calibrated();
    let t = ModelTemplate::from_toml(WORKFLOW_FILE).unwrap();
    let obs = fx.registry.observations();
    for c in &fx.configs {
        let m = t.bind(&fx_bindings(c, &obs).unwrap()).unwrap();
        let (done, time, price) = fx_oracle(&fx.params, c, &obs);
        assert!((dtmc_reach_probability(&m, "done").unwrap() - done).abs() < 1e-9);
        assert!((dtmc_expected_reward(&m, "time", "end").unwrap() - time).abs() < 1e-9);
        assert!((dtmc_expected_reward(&m, "price", "end").unwrap() - price).abs() < 1e-9);
    }
}

fn requirements(runtime: usize, design: usize) -> Vec<RequirementSpec> {
    let mut v: Vec<RequirementSpec> =
        (1..=runtime).map(|i| RequirementSpec::runtime(&format!("R{i}"), &format!("runtime bound {i}"))).collect();
    v.extend((1..=design).map(|i| RequirementSpec::design_time(&format!("D{i}"), &format!("design property {i}"))));
    v
}

fn design(reqs: &[RequirementSpec]) -> DesignEvidence {
    let mut verdicts: BTreeMap<String, bool> = (1..=9).map(|i| (format!("P{i}"), true)).collect();
    verdicts.extend(reqs.iter().map(|r| (r.id.clone(), true)));
    DesignEvidence { report_digest: format!("sha256:{}", "0f".repeat(32)), verdicts }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_arguments_round_trip_through_outline(
        runtime in 1usize..5,
        design_time in 0usize..3,
        config in "\\([0-9, .]{1,20}\\)",
        summaries in proptest::collection::vec("[A-Za-z0-9 ,.=<>()]{1,40}", 5),
        digests in proptest::collection::vec("[0-9a-f]{64}", 5),
        timestamp in 0u32..100_000,
    ) {
        let reqs = requirements(runtime, design_time);
        let partial = instantiate_partial(&load_pattern(), "sys", &reqs, &design(&reqs), "(initial)").unwrap();
        prop_assert_eq!(partial.stage, Stage::Partial);
        prop_assert!(partial.validate().is_valid());
        let evidence: Vec<EvidenceItem> = (0..runtime)
            .map(|i| EvidenceItem {
                requirement: format!("R{}", i + 1),
                digest: format!("sha256:{}", digests[i]),
                summary: summaries[i].trim().to_string(),
            })
            .collect();
        let binding = RuntimeBinding { config: config.clone(), evidence, timestamp: f64::from(timestamp) };
        let full = instantiate_full(&partial, &binding).unwrap();
        prop_assert!(full.validate().is_valid(), "{:?}", full.validate());
        prop_assert!(full.uninstantiated().is_empty());
        prop_assert_eq!(full.context_configuration(), Some(config.as_str()));

        let text = render(&full, Format::Outline);
        let back = parse_outline(&text).unwrap();
        prop_assert_eq!(render(&back, Format::Outline), text);
        prop_assert_eq!(back.stage, Stage::Full);
        prop_assert_eq!(back.evidence_refs(), full.evidence_refs());
        prop_assert!(back.validate().is_valid());
        for d in &digests[..runtime] {
            let want = format!("sha256:{d}");
            prop_assert!(full.evidence_refs().iter().any(|(_, d)| *d == want));
        }
    }

    #[test]
    fn concrete_models_round_trip(n in 2usize..7, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = MarkovModel::new(ModelKind::Dtmc, (0..n).map(|i| format!("s{i}")).collect());
        for s in 0..n - 1 {
            let to = rng.random_range(0..n - 1);
            let p: f64 = rng.random_range(0.1..0.9);
            m.add_transition(s, to, p);
            m.add_transition(s, n - 1, 1.0 - p);
        }
        m.add_transition(n - 1, n - 1, 1.0);
        m.add_label("goal", &[n - 1]);
        let text = m.to_toml().unwrap();
        let back = MarkovModel::from_toml(&text).unwrap();
        prop_assert!(back.validate().is_valid());
        prop_assert_eq!(back.to_toml().unwrap(), text);
        prop_assert_eq!(dtmc_reach_probability(&back, "goal").unwrap(), dtmc_reach_probability(&m, "goal").unwrap());
    }
}
