//! Best reply process with inertia, and its absorption bounds.

use crate::game::{DeterministicJointPolicy, PolicySpace, StochasticGame};
use crate::graph::BestReplyTable;
use crate::greedy::{inertia_update, GreedySet};
use crate::oracle::{best_reply_set, OpponentPolicy, OracleError};
use crate::rng::stream;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{self, Write};

/// Anything that can produce `Π^i_{π^{-i}}`.
pub trait BestReplyOracle: Sync {
    fn best_reply(&self, i: usize, pi: &DeterministicJointPolicy) -> Result<GreedySet, OracleError>;
}

impl BestReplyOracle for BestReplyTable {
    fn best_reply(&self, i: usize, pi: &DeterministicJointPolicy) -> Result<GreedySet, OracleError> {
        Ok(BestReplyTable::best_reply(self, i, pi).clone())
    }
}

/// Solves the induced MDP on every call; for games too large to tabulate.
pub struct DirectOracle<'a> {
    pub game: &'a StochasticGame,
    pub tie_tol: f64,
}

impl BestReplyOracle for DirectOracle<'_> {
    fn best_reply(&self, i: usize, pi: &DeterministicJointPolicy) -> Result<GreedySet, OracleError> {
        best_reply_set(self.game, i, &OpponentPolicy::Deterministic(pi.clone()), self.tie_tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrpiState {
    pub joint: DeterministicJointPolicy,
    pub step: u64,
    pub inertia: Vec<f64>,
}

impl BrpiState {
    pub fn new(joint: DeterministicJointPolicy, inertia: Vec<f64>) -> Self {
        assert!(inertia.iter().all(|&l| l > 0.0 && l < 1.0), "inertia must lie in (0,1)");
        Self { joint, step: 0, inertia }
    }
}

/// One synchronous step. Agent `i` draws from its own stream keyed by `(seed, i, step)`.
pub fn brpi_step<O: BestReplyOracle + ?Sized>(state: &BrpiState, oracle: &O, seed: u64) -> Result<BrpiState, OracleError> {
    let mut next = state.joint.clone();
    for (i, &lambda) in state.inertia.iter().enumerate() {
        let set = oracle.best_reply(i, &state.joint)?;
        let mut rng = stream(seed, &[i as u64, state.step]);
        next.set_agent(i, inertia_update(state.joint.agent(i), &set, lambda, &mut rng));
    }
    Ok(BrpiState { joint: next, step: state.step + 1, inertia: state.inertia.clone() })
}

/// Joint policies `π_0, …, π_steps`.
pub fn run_brpi<O: BestReplyOracle + ?Sized>(
    init: BrpiState,
    oracle: &O,
    steps: u64,
    seed: u64,
) -> Result<Vec<DeterministicJointPolicy>, OracleError> {
    let mut out = vec![init.joint.clone()];
    let mut state = init;
    for _ in 0..steps {
        state = brpi_step(&state, oracle, seed)?;
        out.push(state.joint.clone());
    }
    Ok(out)
}

/// Exact distribution of the next joint policy, keyed by joint index.
///
/// Enumerates every agent's best-reply set, so it is meant for small fixtures.
pub fn transition_distribution<O: BestReplyOracle + ?Sized>(
    space: &PolicySpace,
    state: &BrpiState,
    oracle: &O,
) -> Result<BTreeMap<usize, f64>, OracleError> {
    let n = state.inertia.len();
    let mut per_agent: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let set = oracle.best_reply(i, &state.joint)?;
        let current = space.encode_agent(i, state.joint.agent(i));
        if set.contains(state.joint.agent(i)) {
            per_agent.push(vec![(current, 1.0)]);
            continue;
        }
        let members: Vec<usize> =
            (0..space.agent_count(i) as usize).filter(|&p| set.contains(&space.decode_agent(i, p))).collect();
        let lambda = state.inertia[i];
        let share = (1.0 - lambda) / members.len() as f64;
        let mut dist = vec![(current, lambda)];
        dist.extend(members.into_iter().map(|p| (p, share)));
        per_agent.push(dist);
    }
    let counts: Vec<usize> = (0..n).map(|i| space.agent_count(i) as usize).collect();
    let mut out = BTreeMap::new();
    let mut stack = vec![(0usize, 0usize, 1usize, 1.0f64)];
    while let Some((i, idx, stride, p)) = stack.pop() {
        if i == n {
            *out.entry(idx).or_insert(0.0) += p;
            continue;
        }
        for &(k, q) in &per_agent[i] {
            stack.push((i + 1, idx + k * stride, stride * counts[i], p * q));
        }
    }
    Ok(out)
}

/// `min_j (1−λ^j)/|Π^j| · ∏_{i≠j} λ^i`: a lower bound on the probability of following
/// any given edge of the best-reply graph in one step.
pub fn edge_probability_bound(lambdas: &[f64], policy_counts: &[f64]) -> f64 {
    (0..lambdas.len())
        .map(|j| {
            let others: f64 = lambdas.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, l)| l).product();
            (1.0 - lambdas[j]) / policy_counts[j] * others
        })
        .fold(f64::INFINITY, f64::min)
}

/// `p̂ = (min_j (1−λ^j)/|Π^j| · ∏_{i≠j} λ^i)^L`, a lower bound on the probability of
/// reaching an equilibrium within `L` steps from any joint policy.
pub fn p_hat(lambdas: &[f64], policy_counts: &[f64], l: usize) -> f64 {
    if l == 0 {
        return 1.0;
    }
    edge_probability_bound(lambdas, policy_counts).powi(l as i32)
}

/// Smallest integer `k ≥ L·log δ / log(1 − p̂) + L`; equals `L` when `p̂ = 1`.
///
/// Saturates at `u64::MAX` when the bound is astronomically large.
pub fn brpi_step_bound(delta: f64, p_hat: f64, l: usize) -> u64 {
    assert!(delta > 0.0 && delta < 1.0 && p_hat > 0.0 && p_hat <= 1.0);
    if p_hat >= 1.0 {
        return l as u64;
    }
    let k = l as f64 * delta.ln() / (-p_hat).ln_1p() + l as f64;
    k.ceil() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrpiBounds {
    pub p_hat: f64,
    pub k_required: u64,
}

pub fn brpi_bounds(delta: f64, lambdas: &[f64], policy_counts: &[f64], l: usize) -> BrpiBounds {
    let p = p_hat(lambdas, policy_counts, l);
    BrpiBounds { p_hat: p, k_required: brpi_step_bound(delta, p, l) }
}

/// One line per step: `k node is_equilibrium`.
pub fn write_trace<W: Write>(
    w: &mut W,
    space: &PolicySpace,
    trajectory: &[DeterministicJointPolicy],
    is_equilibrium: impl Fn(usize) -> bool,
) -> io::Result<()> {
    for (k, pi) in trajectory.iter().enumerate() {
        let u = space.encode(pi);
        writeln!(w, "{k} {u} {}", u8::from(is_equilibrium(u)))?;
    }
    Ok(())
}
