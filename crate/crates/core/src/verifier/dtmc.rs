use std::collections::VecDeque;

use super::linear::{solve_fixpoint, SolveError};
use super::VerifyError;
use crate::model::{MarkovModel, ModelKind};

fn require_dtmc(model: &MarkovModel) -> Result<(), VerifyError> {
    if model.kind != ModelKind::Dtmc {
        return Err(VerifyError::IncompatibleProperty("DTMC property on a CTMC".into()));
    }
    Ok(())
}

fn target_mask(model: &MarkovModel, label: &str) -> Result<Vec<bool>, VerifyError> {
    model.label_mask(label).ok_or_else(|| VerifyError::UnknownLabel(label.to_string()))
}

/// States reachable from `initial` without passing through a target.
fn reachable_avoiding(rows: &[Vec<(usize, f64)>], initial: usize, target: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; rows.len()];
    let mut queue = VecDeque::from([initial]);
    seen[initial] = true;
    while let Some(s) = queue.pop_front() {
        if target[s] {
            continue;
        }
        for &(t, w) in &rows[s] {
            if w > 0.0 && !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    seen
}

/// States with a positive-probability path to a target.
fn can_reach(rows: &[Vec<(usize, f64)>], target: &[bool]) -> Vec<bool> {
    let n = rows.len();
    let mut preds = vec![Vec::new(); n];
    for (s, row) in rows.iter().enumerate() {
        for &(t, w) in row {
            if w > 0.0 {
                preds[t].push(s);
            }
        }
    }
    let mut ok = target.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| target[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !ok[s] {
                ok[s] = true;
                queue.push_back(s);
            }
        }
    }
    ok
}

fn solve(rows: Vec<Vec<(usize, f64)>>, b: Vec<f64>) -> Result<Vec<f64>, VerifyError> {
    solve_fixpoint(&rows, &b).map_err(|e| match e {
        SolveError::NonConvergence { iterations } => VerifyError::NonConvergence { iterations },
        SolveError::Singular => VerifyError::NonConvergence { iterations: 0 },
    })
}

/// P(F target) from the initial state.
pub fn reach_probability(model: &MarkovModel, target_label: &str) -> Result<f64, VerifyError> {
    require_dtmc(model)?;
    let target = target_mask(model, target_label)?;
    let init = model.initial;
    if target[init] {
        return Ok(1.0);
    }
    let rows = model.rows();
    let reach = can_reach(&rows, &target);
    if !reach[init] {
        return Ok(0.0);
    }
    let live = reachable_avoiding(&rows, init, &target);
    let unknown: Vec<usize> = (0..rows.len()).filter(|&s| live[s] && !target[s] && reach[s]).collect();
    let mut idx = vec![usize::MAX; rows.len()];
    for (k, &s) in unknown.iter().enumerate() {
        idx[s] = k;
    }
    let mut a = Vec::with_capacity(unknown.len());
    let mut b = Vec::with_capacity(unknown.len());
    for &s in &unknown {
        let mut row = Vec::new();
        let mut bs = 0.0;
        for &(t, w) in &rows[s] {
            if target[t] {
                bs += w;
            } else if idx[t] != usize::MAX {
                row.push((idx[t], w));
            }
        }
        a.push(row);
        b.push(bs);
    }
    let x = solve(a, b)?;
    Ok(x[idx[init]].clamp(0.0, 1.0))
}

/// Expected reward accumulated until the first visit to a target state.
/// State rewards are collected on every visit to a non-target state.
pub fn expected_reward(model: &MarkovModel, reward_name: &str, target_label: &str) -> Result<f64, VerifyError> {
    require_dtmc(model)?;
    let target = target_mask(model, target_label)?;
    let reward = model.reward(reward_name).ok_or_else(|| VerifyError::UnknownReward(reward_name.to_string()))?;
    let init = model.initial;
    if target[init] {
        return Ok(0.0);
    }
    let rows = model.rows();
    let reach = can_reach(&rows, &target);
    let live = reachable_avoiding(&rows, init, &target);
    let unknown: Vec<usize> = (0..rows.len()).filter(|&s| live[s] && !target[s]).collect();
    if let Some(&s) = unknown.iter().find(|&&s| !reach[s]) {
        return Err(VerifyError::DivergentReward { state: model.states[s].clone() });
    }
    let mut idx = vec![usize::MAX; rows.len()];
    for (k, &s) in unknown.iter().enumerate() {
        idx[s] = k;
    }
    let mut a = Vec::with_capacity(unknown.len());
    let mut b = Vec::with_capacity(unknown.len());
    for &s in &unknown {
        let mut row = Vec::new();
        let mut bs = reward.state_reward(s);
        for &(t, w) in &rows[s] {
            bs += w * reward.transition_reward(s, t);
            if !target[t] {
                row.push((idx[t], w));
            }
        }
        a.push(row);
        b.push(bs);
    }
    let x = solve(a, b)?;
    Ok(x[idx[init]])
}
