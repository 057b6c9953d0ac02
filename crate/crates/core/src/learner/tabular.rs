//! Tabular Q-learning agents.

use super::{agent_rng, initial_policy, run_agents, Agent, AgentParams, PhaseConfig, Restart, Trajectory, ValueModel};
use crate::game::{DeterministicJointPolicy, GameError, StochasticGame};
use crate::oracle::QTable;

/// Box `[lo, hi]` that Q-tables are clamped to at the end of each phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QBox {
    pub lo: f64,
    pub hi: f64,
}

impl QBox {
    /// `[min(r_min,0)/(1−γ), max(r_max,0)/(1−γ)]`: the discounted value range widened to
    /// contain the zero initialization, so that with `η ≤ 1` the clamp never binds.
    pub fn default_for(game: &StochasticGame, i: usize) -> Self {
        let (rmin, rmax) = game.reward_bounds(i);
        let g = game.discount(i);
        Self { lo: rmin.min(0.0) / (1.0 - g), hi: rmax.max(0.0) / (1.0 - g) }
    }
}

#[derive(Debug, Clone)]
pub struct TabularModel {
    pub q: QTable,
    pub qbox: QBox,
}

impl ValueModel for TabularModel {
    fn num_actions(&self, s: usize) -> usize {
        self.q.at(s).len()
    }

    fn value(&self, s: usize, a: usize) -> f64 {
        self.q.get(s, a)
    }

    fn update(&mut self, s: usize, a: usize, r: f64, next: usize, gamma: f64, eta: f64) {
        let q = self.q.get(s, a);
        let td = (r + gamma * self.q.max_at(next)) - q;
        self.q.set(s, a, q + eta * td);
    }

    fn project(&mut self) {
        let QBox { lo, hi } = self.qbox;
        self.q.values_mut().iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    }
}

pub type TabularAgent = Agent<TabularModel>;

impl TabularAgent {
    /// Zero-initialized agent `i` with the default Q box.
    pub fn tabular(game: &StochasticGame, i: usize, baseline: Vec<usize>, params: AgentParams, seed: u64) -> Self {
        let model = TabularModel { q: QTable::zeros(game, i), qbox: QBox::default_for(game, i) };
        Agent::new(model, baseline, AgentParams { gamma: game.discount(i), ..params }, agent_rng(seed, i))
    }
}

/// One agent per player from `init` (or a seeded uniform draw), then the phase loop.
pub fn run(
    game: &StochasticGame,
    params: &[AgentParams],
    init: Option<&DeterministicJointPolicy>,
    phases: &PhaseConfig,
    seed: u64,
    restart: Restart,
) -> Result<(Trajectory, Vec<TabularAgent>), GameError> {
    let pi0 = init.cloned().unwrap_or_else(|| initial_policy(game, seed));
    let mut agents: Vec<TabularAgent> = (0..game.num_agents())
        .map(|i| TabularAgent::tabular(game, i, pi0.agent(i).to_vec(), params[i], seed))
        .collect();
    let traj = run_agents(game, &mut agents, phases, seed, restart)?;
    Ok((traj, agents))
}
