//! Decentralized learners: each agent sees only the state, its own action, its own
//! reward and the next state, plays a baseline policy with uniform exploration during an
//! exploration phase, and revises the baseline with inertia at the end of the phase.
//!
//! Phases are indexed from 0; phase `k` covers steps `t_k .. t_k + T_k`.

mod linear;
mod tabular;

pub use linear::{run_linear, LinearAgent, LinearModel};
pub use tabular::{run, QBox, TabularAgent, TabularModel};

use crate::game::{DeterministicJointPolicy, GameError, PolicySpace, StochasticGame};
use crate::greedy::{inertia_update, GreedySet};
use crate::rng::stream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Per-phase step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum StepSize {
    Constant(f64),
    /// `1/√(k+1)` in phase `k`, i.e. `1/√k` for phases counted from 1.
    InvSqrt,
}

impl StepSize {
    pub fn at(&self, phase: usize) -> f64 {
        match *self {
            StepSize::Constant(eta) => eta,
            StepSize::InvSqrt => 1.0 / ((phase + 1) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseConfig {
    lengths: Vec<u64>,
}

impl PhaseConfig {
    /// `K` phases of length `T` each.
    pub fn uniform(t: u64, k: usize) -> Self {
        Self::new(vec![t; k])
    }

    pub fn new(lengths: Vec<u64>) -> Self {
        assert!(lengths.iter().all(|&t| t >= 1), "phase lengths must be positive");
        Self { lengths }
    }

    pub fn num_phases(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[u64] {
        &self.lengths
    }

    /// `t_0 = 0`, `t_{k+1} = t_k + T_k`; one more entry than there are phases.
    pub fn starts(&self) -> Vec<u64> {
        let mut out = vec![0];
        for &t in &self.lengths {
            out.push(out.last().unwrap() + t);
        }
        out
    }
}

/// What the environment does once the state is absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Restart {
    /// Follow the kernel forever.
    Never,
    /// After a step taken from an absorbing state, draw the next state uniformly.
    OnAbsorbing,
}

/// An agent's value estimate: a Q-table or a linear model.
pub trait ValueModel {
    fn num_actions(&self, s: usize) -> usize;
    fn value(&self, s: usize, a: usize) -> f64;
    /// One temporal-difference update of the estimate at `(s, a)`.
    fn update(&mut self, s: usize, a: usize, r: f64, next: usize, gamma: f64, eta: f64);
    /// Projection onto the compact parameter set.
    fn project(&mut self);

    fn max_value(&self, s: usize) -> f64 {
        (0..self.num_actions(s)).map(|a| self.value(s, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Per-state `{a : value(s,a) ≥ max − tol}`.
    fn greedy_set(&self, num_states: usize, tol: f64) -> GreedySet {
        let rows: Vec<Vec<f64>> =
            (0..num_states).map(|s| (0..self.num_actions(s)).map(|a| self.value(s, a)).collect()).collect();
        GreedySet::from_values(rows.iter().map(Vec::as_slice), tol)
    }
}

/// Agent-side parameters shared by both learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentParams {
    pub rho: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub gamma: f64,
    pub step: StepSize,
}

/// One learning agent. It holds no reference to the game or to other agents.
#[derive(Debug, Clone)]
pub struct Agent<M> {
    pub model: M,
    baseline: Vec<usize>,
    params: AgentParams,
    num_states: usize,
    rng: ChaCha8Rng,
}

impl<M: ValueModel> Agent<M> {
    pub fn new(model: M, baseline: Vec<usize>, params: AgentParams, rng: ChaCha8Rng) -> Self {
        assert!(params.rho > 0.0 && params.rho < 1.0, "rho must lie in (0,1)");
        assert!(params.lambda > 0.0 && params.lambda < 1.0, "lambda must lie in (0,1)");
        assert!(params.zeta > 0.0, "zeta must be positive");
        let num_states = baseline.len();
        Self { model, baseline, params, num_states, rng }
    }

    pub fn baseline(&self) -> &[usize] {
        &self.baseline
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    /// Baseline action with probability `1−ρ`, otherwise uniform over the state's actions.
    pub fn act(&mut self, s: usize) -> usize {
        if self.rng.gen::<f64>() < self.params.rho {
            self.rng.gen_range(0..self.model.num_actions(s))
        } else {
            self.baseline[s]
        }
    }

    /// The only information an agent receives from the environment.
    pub fn observe(&mut self, s: usize, a: usize, r: f64, next: usize, eta: f64) {
        self.model.update(s, a, r, next, self.params.gamma, eta);
    }

    /// `ζ/2`-greedy set, inertia update of the baseline, then projection of the model.
    /// Returns the size of the greedy set.
    pub fn end_phase(&mut self) -> f64 {
        let set = self.model.greedy_set(self.num_states, 0.5 * self.params.zeta);
        self.baseline = inertia_update(&self.baseline, &set, self.params.lambda, &mut self.rng);
        self.model.project();
        set.size()
    }
}

/// Baselines `π_0 … π_K` and per-phase greedy-set sizes `[phase][agent]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub baselines: Vec<DeterministicJointPolicy>,
    pub greedy_sizes: Vec<Vec<f64>>,
}

/// Stream keys under a trial seed.
pub(crate) const ENV_STREAM: u64 = 0xE17;
pub(crate) const AGENT_STREAM: u64 = 0xA6E;
pub(crate) const INIT_STREAM: u64 = 0x1417;

/// Private stream for agent `i` under `seed`.
pub fn agent_rng(seed: u64, i: usize) -> ChaCha8Rng {
    stream(seed, &[AGENT_STREAM, i as u64])
}

/// Uniform random `π_0` drawn from the trial's initialization stream.
pub fn initial_policy(game: &StochasticGame, seed: u64) -> DeterministicJointPolicy {
    PolicySpace::new(game).sample(&mut stream(seed, &[INIT_STREAM]))
}

/// Run the environment loop. Agents act in lockstep and never exchange information.
pub fn run_agents<M: ValueModel>(
    game: &StochasticGame,
    agents: &mut [Agent<M>],
    phases: &PhaseConfig,
    seed: u64,
    restart: Restart,
) -> Result<Trajectory, GameError> {
    let n = game.num_agents();
    assert_eq!(agents.len(), n, "one agent per player");
    let ns = game.num_states();
    let absorbing: Vec<bool> = {
        let list = game.absorbing_states();
        (0..ns).map(|s| list.contains(&s)).collect()
    };
    let mut env = stream(seed, &[ENV_STREAM]);
    let snapshot = |agents: &[Agent<M>]| {
        DeterministicJointPolicy::new(game, agents.iter().map(|a| a.baseline.clone()).collect()).expect("valid baseline")
    };
    let mut s = env.gen_range(0..ns);
    let mut joint = vec![0usize; n];
    let mut baselines = vec![snapshot(agents)];
    let mut greedy_sizes = Vec::with_capacity(phases.num_phases());
    for (k, &len) in phases.lengths().iter().enumerate() {
        let etas: Vec<f64> = agents.iter().map(|a| a.params.step.at(k)).collect();
        for _ in 0..len {
            for (i, agent) in agents.iter_mut().enumerate() {
                joint[i] = agent.act(s);
            }
            let ja = game.joint_index(s, &joint)?;
            let next = game.sample_next(s, ja, &mut env)?;
            let rewards = game.rewards_at(s, ja);
            for (i, agent) in agents.iter_mut().enumerate() {
                agent.observe(s, joint[i], rewards[i], next, etas[i]);
            }
            s = if restart == Restart::OnAbsorbing && absorbing[s] { env.gen_range(0..ns) } else { next };
        }
        greedy_sizes.push(agents.iter_mut().map(Agent::end_phase).collect());
        baselines.push(snapshot(agents));
    }
    Ok(Trajectory { baselines, greedy_sizes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureBasis;
    use crate::game::testing::random_game;
    use crate::game::BehaviorPolicy;
    use crate::oracle::{optimal_q, OpponentPolicy};
    use crate::build_gridworld;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
    use rand::SeedableRng;
    use std::sync::Arc;

    fn params(n: usize, eta: StepSize) -> Vec<AgentParams> {
        vec![AgentParams { rho: 0.3, lambda: 0.4, zeta: 0.05, gamma: 0.0, step: eta }; n]
    }

    #[test]
    fn step_sizes() {
        assert_eq!(StepSize::InvSqrt.at(0), 1.0);
        assert_eq!(StepSize::InvSqrt.at(3), 0.5);
        assert_eq!(StepSize::Constant(0.1).at(7), 0.1);
    }

    #[test]
    fn phase_starts() {
        let p = PhaseConfig::new(vec![3, 1, 2]);
        assert_eq!(p.starts(), vec![0, 3, 4, 6]);
        assert_eq!(PhaseConfig::uniform(200, 4).starts()[4], 800);
    }

    #[test]
    #[should_panic]
    fn zero_length_phase_is_rejected() {
        PhaseConfig::new(vec![1, 0]);
    }

    /// An agent is driven purely through (s, own action, own reward, s').
    #[test]
    fn agents_only_see_local_information() {
        let game = build_gridworld();
        let p = params(1, StepSize::Constant(0.5))[0];
        let mut agent = TabularAgent::tabular(&game, 0, vec![0; 9], p, 1);
        let observe: fn(&mut TabularAgent, usize, usize, f64, usize, f64) = TabularAgent::observe;
        let a = agent.act(4);
        observe(&mut agent, 4, a, -1.0, 5, 0.5);
        assert_eq!(agent.model.q.get(4, a), -0.5);
        agent.end_phase();
    }

    #[test]
    fn indicator_features_reproduce_the_tabular_learner_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut games: Vec<StochasticGame> = (0..4).map(|_| random_game(&mut rng, 2, 3, 3)).collect();
        games.push(build_gridworld());
        for (g, game) in games.iter().enumerate() {
            let n = game.num_agents();
            let p = params(n, StepSize::InvSqrt);
            let phases = PhaseConfig::uniform(50, 30);
            let (t1, a1) = run(game, &p, None, &phases, g as u64, Restart::OnAbsorbing).unwrap();
            let bases: Vec<Arc<FeatureBasis>> = (0..n).map(|i| Arc::new(FeatureBasis::indicator(game, i))).collect();
            let (t2, a2) = run_linear(game, &bases, None, &p, None, &phases, g as u64, Restart::OnAbsorbing).unwrap();
            assert_eq!(t1, t2);
            for i in 0..n {
                let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(a1[i].model.q.values()), bits(&a2[i].model.theta));
            }
        }
    }

    #[test]
    fn runs_are_reproducible_and_seed_dependent() {
        let game = build_gridworld();
        let p = params(2, StepSize::InvSqrt);
        let phases = PhaseConfig::uniform(100, 20);
        let a = run(&game, &p, None, &phases, 9, Restart::OnAbsorbing).unwrap().0;
        let b = run(&game, &p, None, &phases, 9, Restart::OnAbsorbing).unwrap().0;
        let c = run(&game, &p, None, &phases, 10, Restart::OnAbsorbing).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.baselines.len(), 21);
        assert_eq!(a.greedy_sizes.len(), 20);
    }

    #[test]
    fn constant_rewards_never_move_the_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let game = random_game(&mut rng, 2, 3, 3).map_rewards(|_, _| 0.0);
        let (t, _) = run(&game, &params(2, StepSize::InvSqrt), None, &PhaseConfig::uniform(20, 50), 1, Restart::Never).unwrap();
        assert!(t.baselines.iter().all(|b| *b == t.baselines[0]));
    }

    #[test]
    fn single_agent_q_approaches_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let game = random_game(&mut rng, 1, 4, 3);
        let p = vec![AgentParams { rho: 0.5, lambda: 0.5, zeta: 0.05, gamma: 0.0, step: StepSize::Constant(0.002) }];
        let (_, agents) = run(&game, &p, None, &PhaseConfig::uniform(200_000, 1), 2, Restart::Never).unwrap();
        let alone = OpponentPolicy::Behavior(BehaviorPolicy::new(initial_policy(&game, 2), vec![0.5]));
        let exact = optimal_q(&game, 0, &alone, 1e-12).unwrap();
        let err = agents[0].model.q.sup_distance(&exact);
        assert!(err < 0.05, "sup error {err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// With η ≤ 1, every estimate stays inside the discounted reward range.
        #[test]
        fn tabular_estimates_stay_in_the_value_range(seed in any::<u64>(), eta in 0.01f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let game = random_game(&mut rng, 2, 3, 3);
            let (_, agents) = run(&game, &params(2, StepSize::Constant(eta)), None, &PhaseConfig::uniform(30, 10), seed, Restart::Never).unwrap();
            for (i, a) in agents.iter().enumerate() {
                let QBox { lo, hi } = QBox::default_for(&game, i);
                prop_assert!(a.model.q.values().iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
            }
        }
    }
}
