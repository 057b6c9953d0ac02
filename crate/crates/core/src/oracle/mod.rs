//! Exact computations the theory consumes: Bellman fixed points, best replies,
//! stationary distributions, mixing times, linear projections and game constants.

mod chain;
mod constants;
mod linear;

pub use chain::{
    analyze_chain, behavior_state_chain, mixing_time, mixing_time_agent, stationary_by_power,
    stationary_distribution, ChainAnalysis, ChainError,
};
pub use constants::{
    assumption5_diagnostic, delta_bar_mixture, game_constants, ConstantsConfig, GameConstants,
    LinearSetup, ScanMode,
};
pub use linear::{linear_best_reply_set, linear_projection, projected_q, ThetaBall};

use crate::game::{BehaviorPolicy, DeterministicJointPolicy, StochasticGame};
use crate::greedy::GreedySet;
use thiserror::Error;

/// Default sup-norm accuracy for oracle fixed points.
pub const DEFAULT_Q_TOL: f64 = 1e-12;
/// Default tie tolerance for oracle best replies.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("value iteration for agent {agent} did not converge within {iterations} iterations")]
    NoConvergence { agent: usize, iterations: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("feature matrix of agent {agent} has rank {rank} < {dim}; basis of size {dim} is not linearly independent")]
    RankDeficient { agent: usize, rank: usize, dim: usize },
    #[error("feature basis does not match agent {agent}: expected {expected} rows, got {got}")]
    FeatureShape { agent: usize, expected: usize, got: usize },
    #[error("degenerate minimum separation: every optimal Q-function scanned is constant across actions")]
    DegenerateZetaBar,
}

/// Agent-`i` values on its (state, action position) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(game: &StochasticGame, i: usize) -> Self {
        Self::filled(game, i, 0.0)
    }

    pub fn filled(game: &StochasticGame, i: usize, v: f64) -> Self {
        let mut offsets = vec![0];
        for s in 0..game.num_states() {
            offsets.push(offsets[s] + game.num_actions(i, s));
        }
        let n = offsets[game.num_states()];
        Self { offsets, values: vec![v; n] }
    }

    /// Table from a flat vector in (state, position) order.
    pub fn from_values(game: &StochasticGame, i: usize, values: Vec<f64>) -> Option<Self> {
        let mut q = Self::zeros(game, i);
        (values.len() == q.values.len()).then(|| {
            q.values = values;
            q
        })
    }

    pub fn num_states(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.at(s)[a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[self.offsets[s] + a] = v;
    }

    pub fn at(&self, s: usize) -> &[f64] {
        &self.values[self.offsets[s]..self.offsets[s + 1]]
    }

    pub fn at_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.values[self.offsets[s]..self.offsets[s + 1]]
    }

    pub fn max_at(&self, s: usize) -> f64 {
        self.at(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Flat index of (s, a).
    pub fn index(&self, s: usize, a: usize) -> usize {
        self.offsets[s] + a
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.num_states()).map(move |s| self.at(s))
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Per-state `{a : Q(s,a) ≥ max − tol}`.
    pub fn greedy_set(&self, tol: f64) -> GreedySet {
        GreedySet::from_values(self.rows(), tol)
    }
}

/// Per-agent, per-state action distributions (agent `i`'s own entry is ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPolicy {
    dists: Vec<Vec<Vec<f64>>>,
}

impl ProductPolicy {
    pub fn new(dists: Vec<Vec<Vec<f64>>>) -> Self {
        Self { dists }
    }

    /// Agents in `baseline_agents` follow `pi`; every other agent plays uniformly.
    pub fn baseline_or_uniform(game: &StochasticGame, pi: &DeterministicJointPolicy, baseline_agents: &[usize]) -> Self {
        let dists = (0..game.num_agents())
            .map(|j| {
                (0..game.num_states())
                    .map(|s| {
                        let k = game.num_actions(j, s);
                        if baseline_agents.contains(&j) {
                            (0..k).map(|p| if p == pi.action(j, s) { 1.0 } else { 0.0 }).collect()
                        } else {
                            vec![1.0 / k as f64; k]
                        }
                    })
                    .collect()
            })
            .collect();
        Self { dists }
    }

    fn prob(&self, j: usize, s: usize, pos: usize) -> f64 {
        self.dists[j][s][pos]
    }
}

/// What the opponents of agent `i` play.
#[derive(Debug, Clone, PartialEq)]
pub enum OpponentPolicy {
    Deterministic(DeterministicJointPolicy),
    Behavior(BehaviorPolicy),
    Mixture(Vec<(f64, ProductPolicy)>),
}

impl OpponentPolicy {
    /// Probability, for each joint action at `s`, of the opponents' part of it.
    pub fn weights(&self, game: &StochasticGame, i: usize, s: usize) -> Vec<f64> {
        let n = game.num_agents();
        (0..game.joint_count(s))
            .map(|ja| {
                let joint = game.decode_joint(s, ja);
                let others = (0..n).filter(|&j| j != i);
                match self {
                    OpponentPolicy::Deterministic(pi) => {
                        if others.into_iter().all(|j| joint[j] == pi.action(j, s)) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    OpponentPolicy::Behavior(bp) => {
                        others.map(|j| bp.prob(j, s, joint[j], game.num_actions(j, s))).product()
                    }
                    OpponentPolicy::Mixture(parts) => parts
                        .iter()
                        .map(|(w, p)| w * (0..n).filter(|&j| j != i).map(|j| p.prob(j, s, joint[j])).product::<f64>())
                        .sum(),
                }
            })
            .collect()
    }
}

/// Single-agent MDP seen by agent `i` when the opponents are fixed.
#[derive(Debug, Clone)]
pub struct InducedMdp {
    agent: usize,
    gamma: f64,
    num_states: usize,
    template: QTable,
    rewards: Vec<f64>,
    trans: Vec<f64>,
}

impl InducedMdp {
    pub fn new(game: &StochasticGame, i: usize, opp: &OpponentPolicy) -> Self {
        let ns = game.num_states();
        let template = QTable::zeros(game, i);
        let pairs = template.values.len();
        let mut rewards = vec![0.0; pairs];
        let mut trans = vec![0.0; pairs * ns];
        for s in 0..ns {
            let w = opp.weights(game, i, s);
            for (ja, &wj) in w.iter().enumerate() {
                if wj == 0.0 {
                    continue;
                }
                let a = game.decode_joint(s, ja)[i];
                let k = template.index(s, a);
                rewards[k] += wj * game.reward(i, s, ja);
                for (t, &p) in game.row(s, ja).iter().enumerate() {
                    trans[k * ns + t] += wj * p;
                }
            }
        }
        Self { agent: i, gamma: game.discount(i), num_states: ns, template, rewards, trans }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Expected reward of each (s, a) pair.
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Next-state distribution of flat pair `k`.
    pub fn transition(&self, k: usize) -> &[f64] {
        &self.trans[k * self.num_states..(k + 1) * self.num_states]
    }

    fn apply_with(&self, v: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let row = self.transition(k);
            let ev: f64 = row.iter().zip(v).map(|(p, x)| p * x).sum();
            *o = self.rewards[k] + self.gamma * ev;
        }
    }

    /// `r̄ + γ P̄ max Q`.
    pub fn apply(&self, q: &QTable) -> QTable {
        let v: Vec<f64> = (0..self.num_states).map(|s| q.max_at(s)).collect();
        let mut out = self.template.clone();
        self.apply_with(&v, &mut out.values);
        out
    }

    /// Value iteration from 0 until `‖Q_{n+1} − Q_n‖ ≤ tol(1−γ)/γ`.
    ///
    /// Iteration also stops once the residual is at the floating-point resolution of the
    /// iterate, where further sweeps cannot reduce it.
    pub fn solve(&self, tol: f64) -> Result<QTable, OracleError> {
        if !(tol > 0.0) {
            return Err(OracleError::BadTolerance(tol));
        }
        let stop = tol * (1.0 - self.gamma) / self.gamma;
        let mut q = self.template.clone();
        let mut next = q.values.clone();
        let mut v = vec![0.0; self.num_states];
        for _ in 0..MAX_ITERATIONS {
            for (s, x) in v.iter_mut().enumerate() {
                *x = q.max_at(s);
            }
            self.apply_with(&v, &mut next);
            let mut residual = 0.0f64;
            let mut scale = 0.0f64;
            for (a, b) in q.values.iter().zip(&next) {
                residual = residual.max((a - b).abs());
                scale = scale.max(b.abs());
            }
            std::mem::swap(&mut q.values, &mut next);
            if residual <= stop || residual <= 8.0 * f64::EPSILON * scale {
                return Ok(q);
            }
        }
        Err(OracleError::NoConvergence { agent: self.agent, iterations: MAX_ITERATIONS })
    }

    /// Exact value `V^π(s)` of a deterministic agent policy, by a linear solve.
    pub fn evaluate(&self, policy: &[usize]) -> Vec<f64> {
        let n = self.num_states;
        let mut a = nalgebra::DMatrix::<f64>::identity(n, n);
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        for s in 0..n {
            let k = self.template.index(s, policy[s]);
            b[s] = self.rewards[k];
            for (t, &p) in self.transition(k).iter().enumerate() {
                a[(s, t)] -= self.gamma * p;
            }
        }
        a.lu().solve(&b).expect("I − γP is invertible for γ < 1").iter().copied().collect()
    }
}

/// `𝒯^i_{π^{-i}}(Q)` per the Bellman operator.
pub fn bellman_apply(game: &StochasticGame, i: usize, q: &QTable, opp: &OpponentPolicy) -> QTable {
    InducedMdp::new(game, i, opp).apply(q)
}

/// `Q*_{π^{-i}}` to sup-norm accuracy `tol`.
pub fn optimal_q(game: &StochasticGame, i: usize, opp: &OpponentPolicy, tol: f64) -> Result<QTable, OracleError> {
    InducedMdp::new(game, i, opp).solve(tol)
}

/// `Π^i_{π^{-i}}` as per-state maximizer sets of `Q*` within `tie_tol`.
pub fn best_reply_set(
    game: &StochasticGame,
    i: usize,
    opp: &OpponentPolicy,
    tie_tol: f64,
) -> Result<GreedySet, OracleError> {
    Ok(optimal_q(game, i, opp, DEFAULT_Q_TOL)?.greedy_set(tie_tol))
}
