//! Small chains with hand-derived answers, shared by the corpus tests and
//! the acceptance run.

use dynassure::model::{MarkovModel, ModelKind, RewardStructure};
use dynassure::verifier::{ctmc_cumulative_reward, dtmc_expected_reward, dtmc_reach_probability};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dtmc, label, model, state_reward, transition_reward};

pub const DTMC_TOL: f64 = 1e-9;
pub const MC_RUNS: usize = 1_000_000;
pub const MC_SEED: u64 = 0x5eed;

pub enum Check {
    Reach(&'static str, f64),
    Reward(&'static str, &'static str, f64),
}

pub struct DtmcCase {
    pub name: &'static str,
    pub model: MarkovModel,
    pub checks: Vec<Check>,
}

impl DtmcCase {
    /// Largest absolute error over the case's checks.
    pub fn worst_error(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| match *c {
                Check::Reach(l, want) => (dtmc_reach_probability(&self.model, l).unwrap() - want).abs(),
                Check::Reward(r, l, want) => (dtmc_expected_reward(&self.model, r, l).unwrap() - want).abs(),
            })
            .fold(0.0, f64::max)
    }
}

fn absorbing(mut edges: Vec<(usize, usize, f64)>, absorbing: &[usize]) -> Vec<(usize, usize, f64)> {
    edges.extend(absorbing.iter().map(|&s| (s, s, 1.0)));
    edges
}

/// Random walk on 0..=n with up-probability p, absorbing at both ends.
pub fn gamblers_ruin(n: usize, p: f64, start: usize) -> MarkovModel {
    let mut e = Vec::new();
    for i in 1..n {
        e.push((i, i + 1, p));
        e.push((i, i - 1, 1.0 - p));
    }
    let mut m = dtmc(n + 1, &absorbing(e, &[0, n]));
    m.initial = start;
    let m = label(m, "win", &[n]);
    let m = label(m, "end", &[0, n]);
    let mut r = vec![1.0; n + 1];
    r[0] = 0.0;
    r[n] = 0.0;
    state_reward(m, "steps", &r)
}

fn ruin_win(n: usize, p: f64, i: usize) -> f64 {
    if (p - 0.5).abs() < 1e-15 {
        return i as f64 / n as f64;
    }
    let r = (1.0 - p) / p;
    (1.0 - r.powi(i as i32)) / (1.0 - r.powi(n as i32))
}

fn ruin_duration(n: usize, p: f64, i: usize) -> f64 {
    let (i, nf) = (i as f64, n as f64);
    if (p - 0.5).abs() < 1e-15 {
        return i * (nf - i);
    }
    let q = 1.0 - p;
    i / (q - p) - nf / (q - p) * ruin_win(n, p, i as usize)
}

pub fn dtmc_cases() -> Vec<DtmcCase> {
    use Check::{Reach, Reward};
    let mut v = Vec::new();
    let mut case = |name, model, checks| v.push(DtmcCase { name, model, checks });

    case(
        "single branch",
        label(dtmc(3, &absorbing(vec![(0, 1, 0.37), (0, 2, 0.63)], &[1, 2])), "goal", &[1]),
        vec![Reach("goal", 0.37)],
    );

    let m = label(dtmc(2, &absorbing(vec![(0, 0, 0.75), (0, 1, 0.25)], &[1])), "goal", &[1]);
    case("geometric retry", state_reward(m, "tries", &[1.0, 0.0]), vec![Reach("goal", 1.0), Reward("tries", "goal", 4.0)]);

    // E0 = 1 + 0.9 E1, E1 = 1 + 0.2 E0
    let e = absorbing(vec![(0, 1, 0.9), (0, 3, 0.1), (1, 2, 0.8), (1, 0, 0.2)], &[2, 3]);
    let m = state_reward(label(label(dtmc(4, &e), "ok", &[2]), "end", &[2, 3]), "steps", &[1.0, 1.0, 0.0, 0.0]);
    case("retry with loss", m, vec![Reach("ok", 0.72 / 0.82), Reward("steps", "end", 1.9 / 0.82)]);

    case("biased ruin probability", gamblers_ruin(5, 0.4, 2), vec![Reach("win", ruin_win(5, 0.4, 2))]);
    case("fair ruin", gamblers_ruin(5, 0.5, 3), vec![Reach("win", 0.6), Reward("steps", "end", 6.0)]);
    case("biased ruin duration", gamblers_ruin(5, 0.4, 2), vec![Reward("steps", "end", ruin_duration(5, 0.4, 2))]);
    case(
        "favourable ruin",
        gamblers_ruin(4, 0.6, 1),
        vec![Reach("win", ruin_win(4, 0.6, 1)), Reward("steps", "end", ruin_duration(4, 0.6, 1))],
    );

    case("unreachable target", label(dtmc(3, &absorbing(vec![(0, 1, 1.0)], &[1, 2])), "goal", &[2]), vec![Reach("goal", 0.0)]);

    let m = label(dtmc(2, &absorbing(vec![(0, 1, 1.0)], &[1])), "goal", &[0]);
    case("initial state is target", state_reward(m, "cost", &[5.0, 5.0]), vec![Reach("goal", 1.0), Reward("cost", "goal", 0.0)]);

    // s0 -> s1 | s2; s1 -> a | s0; s2 -> b | c
    let e = absorbing(vec![(0, 1, 0.5), (0, 2, 0.5), (1, 3, 0.5), (1, 0, 0.5), (2, 4, 0.5), (2, 5, 0.5)], &[3, 4, 5]);
    let m = label(label(label(dtmc(6, &e), "a", &[3]), "b", &[4]), "end", &[3, 4, 5]);
    let m = state_reward(m, "flips", &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    case(
        "coin simulates a three-way choice",
        m,
        vec![Reach("a", 1.0 / 3.0), Reach("b", 1.0 / 3.0), Reward("flips", "end", 8.0 / 3.0)],
    );

    let p = [0.99, 0.95, 0.9, 0.97];
    let mut e = Vec::new();
    for (i, &pi) in p.iter().enumerate() {
        e.push((i, i + 1, pi));
        e.push((i, 5, 1.0 - pi));
    }
    let r = [2.0, 3.0, 5.0, 7.0, 0.0, 0.0];
    let m = state_reward(label(label(dtmc(6, &absorbing(e, &[4, 5])), "done", &[4]), "end", &[4, 5]), "time", &r);
    let mut want = 0.0;
    let mut reach = 1.0;
    for i in 0..4 {
        want += reach * r[i];
        reach *= p[i];
    }
    case("series of stages", m, vec![Reach("done", p.iter().product()), Reward("time", "end", want)]);

    let e = absorbing(vec![(0, 1, 0.3), (0, 2, 0.7), (1, 3, 1.0), (2, 3, 1.0)], &[3]);
    let m = transition_reward(label(dtmc(4, &e), "end", &[3]), "fee", &[((0, 1), 10.0), ((0, 2), 1.0), ((1, 3), 2.0)]);
    case("transition rewards count edges", m, vec![Reward("fee", "end", 0.3 * 12.0 + 0.7)]);

    let (a, b, c) = (0.4, 0.35, 0.6);
    let e = absorbing(vec![(0, 1, a), (0, 2, b), (0, 3, 1.0 - a - b), (1, 0, c), (1, 3, 1.0 - c)], &[2, 3]);
    case("loop between two states", label(dtmc(4, &e), "goal", &[2]), vec![Reach("goal", b / (1.0 - a * c))]);

    let e = absorbing(vec![(0, 0, 0.5), (0, 1, 0.3), (0, 2, 0.2), (1, 1, 0.9), (1, 3, 0.1)], &[2, 3]);
    case("self loops keep reachability", label(dtmc(4, &e), "goal", &[3]), vec![Reach("goal", 0.6)]);

    let mut e = vec![(0, 1, 1.0)];
    for i in 1..5 {
        e.push((i, i + 1, 0.5));
        e.push((i, i - 1, 0.5));
    }
    let m = state_reward(label(dtmc(6, &absorbing(e, &[5])), "top", &[5]), "steps", &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
    case("reflecting walk hitting time", m, vec![Reward("steps", "top", 25.0)]);

    let e = absorbing(vec![(0, 1, 0.3), (0, 2, 0.7), (1, 3, 0.9), (1, 4, 0.1), (2, 3, 0.6), (2, 4, 0.4)], &[3, 4]);
    case("parallel paths", label(dtmc(5, &e), "goal", &[3]), vec![Reach("goal", 0.69)]);

    let e = absorbing(vec![(0, 1, 1.0), (1, 0, 0.5), (1, 2, 0.5)], &[2]);
    let m = state_reward(label(dtmc(3, &e), "done", &[2]), "visits", &[1.0, 1.0, 0.0]);
    case("two-cycle expected visits", m, vec![Reward("visits", "done", 4.0)]);

    // s3 and s4 are not reachable from s0 and would diverge if they were.
    let e = absorbing(vec![(0, 1, 0.5), (0, 2, 0.5), (3, 3, 0.5), (3, 4, 0.5)], &[1, 2, 4]);
    let m = state_reward(label(dtmc(5, &e), "end", &[1, 2]), "r", &[3.0, 0.0, 0.0, 9.0, 0.0]);
    case("unreachable region is ignored", m, vec![Reward("r", "end", 3.0), Reach("end", 1.0)]);

    // sum_k 0.9^k = 10 in s0, plus s1's reward 4 reached surely.
    let e = absorbing(vec![(0, 0, 0.9), (0, 1, 0.1), (1, 2, 1.0)], &[2]);
    let m = state_reward(label(dtmc(3, &e), "end", &[2]), "r", &[1.0, 4.0, 0.0]);
    case("geometric series reward", m, vec![Reward("r", "end", 14.0)]);

    // Each rung advances with q and falls back to the start otherwise:
    // expected trials for five successes in a row.
    let q: f64 = 0.8;
    let mut e = Vec::new();
    for i in 0..5 {
        e.push((i, i + 1, q));
        e.push((i, 0, 1.0 - q));
    }
    let m = state_reward(label(dtmc(6, &absorbing(e, &[5])), "top", &[5]), "steps", &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
    let want: f64 = (1..=5).map(|k| q.powi(-k)).sum();
    case("six-state ladder", m, vec![Reward("steps", "top", want), Reach("top", 1.0)]);

    v
}

pub struct CtmcCase {
    pub name: &'static str,
    pub model: MarkovModel,
    pub reward: &'static str,
    pub horizon: f64,
}

fn ctmc(n: usize, edges: &[(usize, usize, f64)]) -> MarkovModel {
    label(model(ModelKind::Ctmc, n, edges), "init", &[0])
}

fn sensor(r: f64, p: f64) -> MarkovModel {
    ctmc(3, &[(0, 1, r * p), (0, 2, r * (1.0 - p)), (1, 0, 100.0), (2, 0, 100.0)])
}

pub fn ctmc_cases() -> Vec<CtmcCase> {
    let mut v = Vec::new();
    let mut case = |name, model, reward, horizon| v.push(CtmcCase { name, model, reward, horizon });
    case("on/off switch", state_reward(ctmc(2, &[(0, 1, 1.0), (1, 0, 2.0)]), "up", &[1.0, 0.0]), "up", 3.0);
    case("sensor measurements", transition_reward(sensor(5.0, 0.9), "measure", &[((0, 1), 1.0)]), "measure", 2.0);
    case("sensor energy", transition_reward(sensor(4.0, 0.7), "energy", &[((0, 1), 2.4), ((0, 2), 2.4)]), "energy", 2.5);
    case("pure decay", state_reward(ctmc(2, &[(0, 1, 0.5)]), "alive", &[1.0, 0.0]), "alive", 4.0);
    let e = [(0, 1, 1.5), (1, 2, 1.5), (2, 3, 1.5), (1, 0, 2.0), (2, 1, 2.0), (3, 2, 2.0)];
    case("birth-death queue", state_reward(ctmc(4, &e), "queue", &[0.0, 1.0, 2.0, 3.0]), "queue", 5.0);
    let m = transition_reward(
        ctmc(3, &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0)]),
        "cost",
        &[((0, 1), 1.0), ((1, 2), 0.5), ((2, 0), 2.0)],
    );
    case("weighted cycle with impulses", m, "cost", 6.0);
    case("competing absorption", state_reward(ctmc(3, &[(0, 1, 2.0), (0, 2, 3.0)]), "in_one", &[0.0, 1.0, 0.0]), "in_one", 1.5);
    let m = state_reward(ctmc(3, &[(0, 1, 50.0), (1, 0, 40.0), (1, 2, 0.1), (2, 0, 0.2)]), "slow", &[0.0, 0.0, 1.0]);
    case("stiff rates", m, "slow", 8.0);
    let e = [(0, 1, 0.7), (0, 3, 0.4), (1, 2, 1.1), (1, 4, 0.3), (2, 0, 0.9), (3, 4, 1.3), (4, 0, 0.5), (4, 2, 0.6)];
    let mut m = state_reward(ctmc(5, &e), "r", &[0.5, 1.0, 2.0, 0.0, 1.5]);
    m.rewards.get_mut("r").unwrap().transition.insert((4, 0), 3.0);
    case("mixed five-state generator", m, "r", 4.0);
    case(
        "erlang completion",
        state_reward(ctmc(4, &[(0, 1, 4.0), (1, 2, 4.0), (2, 3, 4.0)]), "done", &[0.0, 0.0, 0.0, 1.0]),
        "done",
        1.2,
    );
    let mut m = state_reward(ctmc(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]), "in0", &[1.0, 0.0, 0.0]);
    m.initial = 2;
    case("late start state", m, "in0", 2.0);
    v
}

/// Mean and standard error of the reward accumulated over `[0, horizon]`.
pub fn simulate(m: &MarkovModel, reward: &str, horizon: f64, seed: u64) -> (f64, f64) {
    let rows = m.rows();
    let r: &RewardStructure = m.reward(reward).unwrap();
    let exit: Vec<f64> = rows.iter().map(|row| row.iter().map(|&(_, w)| w).sum()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..MC_RUNS {
        let mut s = m.initial;
        let mut t = 0.0;
        let mut acc = 0.0;
        loop {
            if exit[s] == 0.0 {
                acc += r.state_reward(s) * (horizon - t);
                break;
            }
            let u: f64 = rng.random();
            let hold = -(1.0 - u).ln() / exit[s];
            if t + hold >= horizon {
                acc += r.state_reward(s) * (horizon - t);
                break;
            }
            acc += r.state_reward(s) * hold;
            t += hold;
            let mut pick = rng.random::<f64>() * exit[s];
            let mut next = rows[s].last().unwrap().0;
            for &(target, w) in &rows[s] {
                if pick < w {
                    next = target;
                    break;
                }
                pick -= w;
            }
            acc += r.transition_reward(s, next);
            s = next;
        }
        sum += acc;
        sq += acc * acc;
    }
    let n = MC_RUNS as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// (numeric value, Monte-Carlo mean, standard error) for case `i`.
pub fn ctmc_versus_simulation(case: &CtmcCase, i: usize) -> (f64, f64, f64) {
    let got = ctmc_cumulative_reward(&case.model, case.reward, case.horizon).unwrap();
    let (mean, se) = simulate(&case.model, case.reward, case.horizon, MC_SEED + i as u64);
    (got, mean, se)
}
