//! Finite discounted stochastic games.
//!
//! A game stores, for every state `s` and every joint action available at `s`, a dense
//! transition row over the ordered state list and one reward per agent. Actions are
//! referred to by their *position* inside the per-state action list `A^i(s)`; the
//! position-to-name mapping goes through the agent's declared action order.
//!
//! Joint actions at a state are indexed mixed-radix with agent 0 as the least
//! significant digit.

mod format;
mod gridworld;
mod policy;
pub(crate) mod validate;

pub use format::{parse_game_spec, serialize_game_spec, ParseError};
pub use gridworld::{build_gridworld, gridworld_with_discount, GRIDWORLD_DISCOUNT};
pub use policy::{BehaviorPolicy, DeterministicJointPolicy, PolicySpace};
pub use validate::{
    reachability, validate_game, validate_game_with, Issue, Reachability, Severity,
    ValidationReport,
};

use rand::Rng;
use thiserror::Error;

/// Upper limit on per-state action counts (maximizer sets are stored as 64-bit masks).
pub const MAX_ACTIONS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("game needs at least one agent")]
    NoAgents,
    #[error("game needs at least one state")]
    NoStates,
    #[error("duplicate state id {0:?}")]
    DuplicateState(String),
    #[error("agent {agent} has no actions at state {state:?}")]
    EmptyActionSet { agent: usize, state: String },
    #[error("agent {agent} has {count} actions at state {state:?}; at most {MAX_ACTIONS} supported")]
    TooManyActions { agent: usize, state: String, count: usize },
    #[error("agent {agent}: action index {action} at state {state:?} is not declared")]
    UndeclaredAction { agent: usize, state: String, action: usize },
    #[error("{what}: expected {expected} entries, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("invalid joint action {joint:?} at state {state:?}")]
    InvalidAction { state: String, joint: Vec<usize> },
    #[error("state index {0} out of range")]
    InvalidState(usize),
    #[error("transition row at state {state:?} has no positive mass")]
    EmptyRow { state: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// An N-agent finite discounted stochastic game. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticGame {
    num_agents: usize,
    states: Vec<String>,
    action_names: Vec<Vec<String>>,
    actions: Vec<Vec<Vec<usize>>>,
    joint_offset: Vec<usize>,
    kernel: Vec<f64>,
    rewards: Vec<f64>,
    discounts: Vec<f64>,
}

impl StochasticGame {
    /// Assemble a game from raw tables.
    ///
    /// `actions[i][s]` lists indices into `action_names[i]`. `kernel` holds one row of
    /// length `|S|` per (state, joint action) in state order then joint-index order;
    /// `rewards` holds `N` entries per (state, joint action). Only shapes are checked
    /// here; stochasticity and discount ranges are reported by [`validate_game`].
    pub fn new(
        states: Vec<String>,
        action_names: Vec<Vec<String>>,
        actions: Vec<Vec<Vec<usize>>>,
        discounts: Vec<f64>,
        kernel: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self, GameError> {
        let n = action_names.len();
        if n == 0 {
            return Err(GameError::NoAgents);
        }
        if states.is_empty() {
            return Err(GameError::NoStates);
        }
        for (k, s) in states.iter().enumerate() {
            if states[..k].contains(s) {
                return Err(GameError::DuplicateState(s.clone()));
            }
        }
        let ns = states.len();
        check_len("per-agent action sets", n, actions.len())?;
        check_len("discounts", n, discounts.len())?;
        for i in 0..n {
            check_len("per-state action sets", ns, actions[i].len())?;
            for s in 0..ns {
                let list = &actions[i][s];
                if list.is_empty() {
                    return Err(GameError::EmptyActionSet { agent: i, state: states[s].clone() });
                }
                if list.len() > MAX_ACTIONS {
                    return Err(GameError::TooManyActions {
                        agent: i,
                        state: states[s].clone(),
                        count: list.len(),
                    });
                }
                for &a in list {
                    if a >= action_names[i].len() || list.iter().filter(|&&b| b == a).count() > 1 {
                        return Err(GameError::UndeclaredAction {
                            agent: i,
                            state: states[s].clone(),
                            action: a,
                        });
                    }
                }
            }
        }
        let mut joint_offset = Vec::with_capacity(ns + 1);
        let mut total = 0usize;
        for s in 0..ns {
            joint_offset.push(total);
            total += (0..n).map(|i| actions[i][s].len()).product::<usize>();
        }
        joint_offset.push(total);
        check_len("kernel entries", total * ns, kernel.len())?;
        check_len("reward entries", total * n, rewards.len())?;
        Ok(Self { num_agents: n, states, action_names, actions, joint_offset, kernel, rewards, discounts })
    }

    /// Build a game by evaluating `f(s, joint positions) -> (row, rewards)` on every
    /// (state, joint action).
    pub fn from_fn<F>(
        states: Vec<String>,
        action_names: Vec<Vec<String>>,
        actions: Vec<Vec<Vec<usize>>>,
        discounts: Vec<f64>,
        mut f: F,
    ) -> Result<Self, GameError>
    where
        F: FnMut(usize, &[usize]) -> (Vec<f64>, Vec<f64>),
    {
        let n = action_names.len();
        let ns = states.len();
        if actions.len() != n || actions.iter().any(|a| a.len() != ns) {
            return Err(GameError::Shape {
                what: "per-agent per-state action sets",
                expected: n * ns,
                got: actions.iter().map(Vec::len).sum(),
            });
        }
        let mut kernel = Vec::new();
        let mut rewards = Vec::new();
        for s in 0..ns {
            let radices: Vec<usize> = (0..n).map(|i| actions[i][s].len()).collect();
            let count: usize = radices.iter().product();
            for ja in 0..count {
                let joint = decode_mixed(ja, &radices);
                let (row, r) = f(s, &joint);
                check_len("transition row", ns, row.len())?;
                check_len("reward vector", n, r.len())?;
                kernel.extend(row);
                rewards.extend(r);
            }
        }
        Self::new(states, action_names, actions, discounts, kernel, rewards)
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|x| x == name)
    }

    /// Declared action names of agent `i`.
    pub fn action_names(&self, i: usize) -> &[String] {
        &self.action_names[i]
    }

    /// `A^i(s)` as indices into [`Self::action_names`].
    pub fn actions(&self, i: usize, s: usize) -> &[usize] {
        &self.actions[i][s]
    }

    pub fn num_actions(&self, i: usize, s: usize) -> usize {
        self.actions[i][s].len()
    }

    /// Name of the action at position `pos` of `A^i(s)`.
    pub fn action_name(&self, i: usize, s: usize, pos: usize) -> &str {
        &self.action_names[i][self.actions[i][s][pos]]
    }

    /// `max_s |A^i(s)|`.
    pub fn max_actions(&self, i: usize) -> usize {
        (0..self.num_states()).map(|s| self.num_actions(i, s)).max().unwrap_or(0)
    }

    /// Number of (state, action) pairs of agent `i`.
    pub fn num_pairs(&self, i: usize) -> usize {
        (0..self.num_states()).map(|s| self.num_actions(i, s)).sum()
    }

    pub fn discount(&self, i: usize) -> f64 {
        self.discounts[i]
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    /// Copy of the game with every discount replaced.
    pub fn with_discounts(&self, discounts: Vec<f64>) -> Result<Self, GameError> {
        check_len("discounts", self.num_agents, discounts.len())?;
        Ok(Self { discounts, ..self.clone() })
    }

    /// Copy of the game with every reward of agent `i` mapped through `f`.
    pub fn map_rewards(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut g = self.clone();
        for (k, r) in g.rewards.iter_mut().enumerate() {
            *r = f(k % self.num_agents, *r);
        }
        g
    }

    /// Number of joint actions available at `s`.
    pub fn joint_count(&self, s: usize) -> usize {
        self.joint_offset[s + 1] - self.joint_offset[s]
    }

    fn radices(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_agents).map(move |i| self.actions[i][s].len())
    }

    /// Mixed-radix index of a joint action (positions per agent) at `s`.
    pub fn joint_index(&self, s: usize, joint: &[usize]) -> Result<usize, GameError> {
        if s >= self.num_states() {
            return Err(GameError::InvalidState(s));
        }
        if joint.len() != self.num_agents || joint.iter().zip(self.radices(s)).any(|(&a, r)| a >= r) {
            return Err(GameError::InvalidAction { state: self.states[s].clone(), joint: joint.to_vec() });
        }
        let mut idx = 0;
        let mut stride = 1;
        for (&a, r) in joint.iter().zip(self.radices(s)) {
            idx += a * stride;
            stride *= r;
        }
        Ok(idx)
    }

    /// Inverse of [`Self::joint_index`].
    pub fn decode_joint(&self, s: usize, ja: usize) -> Vec<usize> {
        let radices: Vec<usize> = self.radices(s).collect();
        decode_mixed(ja, &radices)
    }

    /// Transition row for joint index `ja` at `s`.
    pub fn row(&self, s: usize, ja: usize) -> &[f64] {
        let ns = self.num_states();
        let r = self.joint_offset[s] + ja;
        &self.kernel[r * ns..(r + 1) * ns]
    }

    /// Rewards of all agents for joint index `ja` at `s`.
    pub fn rewards_at(&self, s: usize, ja: usize) -> &[f64] {
        let n = self.num_agents;
        let r = self.joint_offset[s] + ja;
        &self.rewards[r * n..(r + 1) * n]
    }

    pub fn reward(&self, i: usize, s: usize, ja: usize) -> f64 {
        self.rewards_at(s, ja)[i]
    }

    /// `(r_min^i, r_max^i)` over all (state, joint action).
    pub fn reward_bounds(&self, i: usize) -> (f64, f64) {
        self.rewards
            .iter()
            .skip(i)
            .step_by(self.num_agents)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)))
    }

    /// States whose every joint action returns to the state with probability 1.
    pub fn absorbing_states(&self) -> Vec<usize> {
        (0..self.num_states())
            .filter(|&s| (0..self.joint_count(s)).all(|ja| self.row(s, ja)[s] == 1.0))
            .collect()
    }

    /// Draw the next state by inverse CDF over the stored state order and return it
    /// with the reward vector.
    pub fn sample_step<R: Rng + ?Sized>(
        &self,
        s: usize,
        joint: &[usize],
        rng: &mut R,
    ) -> Result<(usize, Vec<f64>), GameError> {
        let ja = self.joint_index(s, joint)?;
        let next = self.sample_next(s, ja, rng)?;
        Ok((next, self.rewards_at(s, ja).to_vec()))
    }

    /// Inverse-CDF draw from the row of joint index `ja` at `s`.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, ja: usize, rng: &mut R) -> Result<usize, GameError> {
        let row = self.row(s, ja);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = None;
        for (k, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = Some(k);
                if u < acc {
                    return Ok(k);
                }
            }
        }
        last.ok_or_else(|| GameError::EmptyRow { state: self.states[s].clone() })
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), GameError> {
    if expected == got {
        Ok(())
    } else {
        Err(GameError::Shape { what, expected, got })
    }
}

/// Digits of `idx` in the mixed radix `radices`, least significant first.
pub(crate) fn decode_mixed(mut idx: usize, radices: &[usize]) -> Vec<usize> {
    radices
        .iter()
        .map(|&r| {
            let d = idx % r;
            idx /= r;
            d
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn joint_index_round_trips() {
        let g = build_gridworld();
        let s = g.state_index("2,2").unwrap();
        for ja in 0..g.joint_count(s) {
            assert_eq!(g.joint_index(s, &g.decode_joint(s, ja)).unwrap(), ja);
        }
        assert!(g.joint_index(s, &[3, 0]).is_err());
    }

    #[test]
    fn two_outcome_row_frequency() {
        let g = StochasticGame::from_fn(
            vec!["x".into(), "y".into()],
            vec![vec!["a".into()]],
            vec![vec![vec![0], vec![0]]],
            vec![0.5],
            |_, _| (vec![0.3, 0.7], vec![0.0]),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let hits = (0..n).filter(|_| g.sample_step(0, &[0], &mut rng).unwrap().0 == 0).count();
        let p = hits as f64 / n as f64;
        let se = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((p - 0.3).abs() < 3.0 * se, "p = {p}");
    }

    #[test]
    fn invalid_action_rejected() {
        let g = build_gridworld();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = g.state_index("1,2").unwrap();
        let err = g.sample_step(s, &[2, 0], &mut rng).unwrap_err();
        assert!(matches!(err, GameError::InvalidAction { .. }));
    }

    #[test]
    fn shape_errors() {
        let err = StochasticGame::new(
            vec!["x".into()],
            vec![vec!["a".into()]],
            vec![vec![vec![0]]],
            vec![0.5],
            vec![1.0, 0.0],
            vec![0.0],
        )
        .unwrap_err();
        assert!(matches!(err, GameError::Shape { .. }));
    }
}
