#![allow(dead_code)]

pub mod corpus;
pub mod mutants;

use std::collections::BTreeMap;

use dynassure::fx::{FxConfig, Operation, WorkflowParams, NO_SERVICE};
use dynassure::model::{MarkovModel, ModelKind, RewardStructure};
use dynassure::uuv::{build_sensor_template, default_sensors, SensorSpec, UuvConfig, UuvRequirements, COMPLETION_RATE};

pub fn model(kind: ModelKind, n: usize, edges: &[(usize, usize, f64)]) -> MarkovModel {
    let mut m = MarkovModel::new(kind, (0..n).map(|i| format!("s{i}")).collect());
    for &(a, b, w) in edges {
        m.add_transition(a, b, w);
    }
    m
}

pub fn dtmc(n: usize, edges: &[(usize, usize, f64)]) -> MarkovModel {
    model(ModelKind::Dtmc, n, edges)
}

pub fn label(mut m: MarkovModel, name: &str, states: &[usize]) -> MarkovModel {
    m.add_label(name, states);
    m
}

pub fn state_reward(mut m: MarkovModel, name: &str, values: &[f64]) -> MarkovModel {
    m.rewards.insert(name.into(), RewardStructure { state: values.to_vec(), transition: BTreeMap::new() });
    m
}

pub fn transition_reward(mut m: MarkovModel, name: &str, values: &[((usize, usize), f64)]) -> MarkovModel {
    let n = m.num_states();
    m.rewards.insert(name.into(), RewardStructure { state: vec![0.0; n], transition: values.iter().copied().collect() });
    m
}

/// Expected time the sensor CTMC spends in `ready` over `[0, t]`, starting
/// in `ready`.
pub fn ready_occupancy(rate: f64, t: f64) -> f64 {
    let c = COMPLETION_RATE;
    let s = rate + c;
    c * t / s + rate / (s * s) * (1.0 - (-s * t).exp())
}

/// Closed-form (measurements, energy) of a configuration over one mission
/// leg, independent of the verifier.
pub fn uuv_oracle(sensors: &[SensorSpec], rates: &[f64], req: &UuvRequirements, c: &UuvConfig) -> (f64, f64) {
    let t = req.mission_length / c.speed;
    let mut measure = 0.0;
    let mut energy = 0.0;
    for (i, s) in sensors.iter().enumerate() {
        if !c.sensors[i] {
            energy += s.energy_off;
            continue;
        }
        let p = (s.p_max - s.kappa * c.speed).clamp(0.0, 1.0);
        let visits = rates[i] * ready_occupancy(rates[i], t);
        measure += p * visits;
        energy += s.energy * visits + s.energy_on;
    }
    (measure, energy)
}

/// Index of the cheapest feasible configuration, earliest on ties within
/// `tie` relative tolerance, together with the feasible count.
pub fn uuv_argmin(
    sensors: &[SensorSpec],
    rates: &[f64],
    req: &UuvRequirements,
    configs: &[UuvConfig],
    w: (f64, f64),
) -> (Option<usize>, Vec<Option<f64>>) {
    let costs: Vec<Option<f64>> = configs
        .iter()
        .map(|c| {
            let (m, e) = uuv_oracle(sensors, rates, req, c);
            (m >= req.min_measurements && e <= req.max_energy).then(|| w.0 * e + w.1 / c.speed)
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
    (best, costs)
}

/// Closed-form (P(done), expected time, expected price) of the trading
/// workflow under `config`, by counting expected state visits.
pub fn fx_oracle(params: &WorkflowParams, config: &FxConfig, obs: &BTreeMap<String, f64>) -> (f64, f64, f64) {
    let get = |op: Operation| -> (f64, f64, f64) {
        let sid = config.service(op);
        if sid == NO_SERVICE {
            return (1.0, 0.0, 0.0);
        }
        (obs[&format!("p_{sid}")], obs[&format!("time_{sid}")], obs[&format!("price_{sid}")])
    };
    let (mw, ta, fa, al, or, no) = (
        get(Operation::MarketWatch),
        get(Operation::TechnicalAnalysis),
        get(Operation::FundamentalAnalysis),
        get(Operation::Alarm),
        get(Operation::Order),
        get(Operation::Notification),
    );
    let e = params.expert;
    let (s, u, h, f) = (params.ta_satisfied, params.ta_unsatisfied, params.ta_high_variance, params.fa_proceed);
    // Expert branch: MW -> TA -> TAr, returning to MW via TAr or Alarm.
    let back = mw.0 * ta.0 * (u + h * al.0);
    let v_mw = e / (1.0 - back);
    let v_ta = v_mw * mw.0;
    let v_tar = v_ta * ta.0;
    let v_al = v_tar * h;
    let v_fa = 1.0 - e;
    let v_or = v_tar * s + v_fa * fa.0 * f;
    let v_no = v_or * or.0;
    let done = v_no * no.0 + v_fa * fa.0 * (1.0 - f);
    let visits = [(v_mw, mw), (v_ta, ta), (v_al, al), (v_fa, fa), (v_or, or), (v_no, no)];
    let time = visits.iter().map(|(v, x)| v * x.1).sum();
    let price = visits.iter().map(|(v, x)| v * x.2).sum();
    (done, time, price)
}

/// Interleaving product of two CTMCs; rewards are summed component-wise.
#[allow(clippy::needless_range_loop)]
pub fn product(a: &MarkovModel, b: &MarkovModel) -> MarkovModel {
    let (na, nb) = (a.num_states(), b.num_states());
    let idx = |i: usize, j: usize| i * nb + j;
    let names = (0..na).flat_map(|i| (0..nb).map(move |j| format!("{i}.{j}"))).collect();
    let mut m = MarkovModel::new(ModelKind::Ctmc, names);
    m.initial = idx(a.initial, b.initial);
    let (ra, rb) = (a.rows(), b.rows());
    for i in 0..na {
        for j in 0..nb {
            for &(t, w) in &ra[i] {
                m.add_transition(idx(i, j), idx(t, j), w);
            }
            for &(t, w) in &rb[j] {
                m.add_transition(idx(i, j), idx(i, t), w);
            }
        }
    }
    for name in a.rewards.keys() {
        let (x, y) = (&a.rewards[name], &b.rewards[name]);
        let mut r = RewardStructure { state: vec![0.0; na * nb], transition: BTreeMap::new() };
        for i in 0..na {
            for j in 0..nb {
                r.state[idx(i, j)] = x.state_reward(i) + y.state_reward(j);
                for &(t, _) in &ra[i] {
                    r.transition.insert((idx(i, j), idx(t, j)), x.transition_reward(i, t));
                }
                for &(t, _) in &rb[j] {
                    r.transition.insert((idx(i, j), idx(i, t)), y.transition_reward(j, t));
                }
            }
        }
        m.rewards.insert(name.clone(), r);
    }
    m
}

pub fn sensor_model(i: usize, rate: f64, speed: f64) -> MarkovModel {
    let t = build_sensor_template(&default_sensors()[i]);
    t.bind(&BTreeMap::from([("r".to_string(), rate), ("sp".to_string(), speed)])).unwrap()
}
