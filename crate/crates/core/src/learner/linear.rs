//! Q-learning with linear function approximation `Q(s,a) = φ(s,a)ᵀθ`.

use super::{agent_rng, initial_policy, run_agents, Agent, AgentParams, PhaseConfig, Restart, Trajectory, ValueModel};
use crate::features::FeatureBasis;
use crate::game::{DeterministicJointPolicy, GameError, StochasticGame};
use crate::oracle::ThetaBall;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct LinearModel {
    pub basis: Arc<FeatureBasis>,
    pub theta: Vec<f64>,
    pub ball: ThetaBall,
}

impl LinearModel {
    pub fn new(basis: Arc<FeatureBasis>, ball: ThetaBall) -> Self {
        let theta = vec![0.0; basis.dim()];
        Self { basis, theta, ball }
    }
}

impl ValueModel for LinearModel {
    fn num_actions(&self, s: usize) -> usize {
        self.basis.num_actions(s)
    }

    fn value(&self, s: usize, a: usize) -> f64 {
        self.basis.value(s, a, &self.theta)
    }

    fn update(&mut self, s: usize, a: usize, r: f64, next: usize, gamma: f64, eta: f64) {
        let td = (r + gamma * self.max_value(next)) - self.value(s, a);
        let k = self.basis.pair(s, a);
        let phi = self.basis.matrix().row(k);
        for (t, f) in self.theta.iter_mut().zip(phi.iter()) {
            *t += eta * f * td;
        }
    }

    fn project(&mut self) {
        self.ball.project(&mut self.theta);
    }
}

pub type LinearAgent = Agent<LinearModel>;

impl LinearAgent {
    /// Zero-initialized agent over `basis`; the ball defaults to [`ThetaBall::default_for`].
    pub fn linear(
        game: &StochasticGame,
        basis: Arc<FeatureBasis>,
        ball: Option<ThetaBall>,
        baseline: Vec<usize>,
        params: AgentParams,
        seed: u64,
    ) -> Self {
        let i = basis.agent();
        let ball = ball.unwrap_or_else(|| ThetaBall::default_for(game, &basis));
        Agent::new(LinearModel::new(basis, ball), baseline, AgentParams { gamma: game.discount(i), ..params }, agent_rng(seed, i))
    }
}

/// Linear counterpart of [`super::run`]; `bases[i]` belongs to agent `i`.
pub fn run_linear(
    game: &StochasticGame,
    bases: &[Arc<FeatureBasis>],
    balls: Option<&[ThetaBall]>,
    params: &[AgentParams],
    init: Option<&DeterministicJointPolicy>,
    phases: &PhaseConfig,
    seed: u64,
    restart: Restart,
) -> Result<(Trajectory, Vec<LinearAgent>), GameError> {
    let pi0 = init.cloned().unwrap_or_else(|| initial_policy(game, seed));
    let mut agents: Vec<LinearAgent> = (0..game.num_agents())
        .map(|i| {
            LinearAgent::linear(game, bases[i].clone(), balls.map(|b| b[i]), pi0.agent(i).to_vec(), params[i], seed)
        })
        .collect();
    let traj = run_agents(game, &mut agents, phases, seed, restart)?;
    Ok((traj, agents))
}
