//! Deterministic and behavior policies, and the mixed-radix policy index space.
//!
//! An agent's deterministic policy is indexed with state 0 as the least significant
//! digit (digit = action position in `A^i(s)`); a joint policy is indexed with agent 0
//! as the least significant digit over the per-agent policy counts.

use super::{decode_mixed, StochasticGame};
use rand::Rng;

/// One action position per (agent, state).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicJointPolicy {
    choice: Vec<Vec<usize>>,
}

impl DeterministicJointPolicy {
    /// Build from `choice[i][s]`, checking every position against `A^i(s)`.
    pub fn new(game: &StochasticGame, choice: Vec<Vec<usize>>) -> Option<Self> {
        let ok = choice.len() == game.num_agents()
            && choice.iter().enumerate().all(|(i, c)| {
                c.len() == game.num_states() && c.iter().enumerate().all(|(s, &a)| a < game.num_actions(i, s))
            });
        ok.then_some(Self { choice })
    }

    /// Build from action names per (agent, state).
    pub fn from_names(game: &StochasticGame, names: &[Vec<&str>]) -> Option<Self> {
        let choice = names
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(s, name)| (0..game.num_actions(i, s)).find(|&p| game.action_name(i, s, p) == *name))
                    .collect::<Option<Vec<_>>>()
            })
            .collect::<Option<Vec<_>>>()?;
        Self::new(game, choice)
    }

    pub fn agent(&self, i: usize) -> &[usize] {
        &self.choice[i]
    }

    pub fn action(&self, i: usize, s: usize) -> usize {
        self.choice[i][s]
    }

    pub fn num_agents(&self) -> usize {
        self.choice.len()
    }

    /// Replace agent `i`'s policy.
    pub fn set_agent(&mut self, i: usize, policy: Vec<usize>) {
        assert_eq!(policy.len(), self.choice[i].len());
        self.choice[i] = policy;
    }

    pub fn into_inner(self) -> Vec<Vec<usize>> {
        self.choice
    }
}

/// Index arithmetic over deterministic policies of a game.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpace {
    radices: Vec<Vec<usize>>,
    agent_counts: Vec<u128>,
}

impl PolicySpace {
    pub fn new(game: &StochasticGame) -> Self {
        let radices: Vec<Vec<usize>> = (0..game.num_agents())
            .map(|i| (0..game.num_states()).map(|s| game.num_actions(i, s)).collect())
            .collect();
        let agent_counts = radices
            .iter()
            .map(|r| r.iter().fold(1u128, |acc, &k| acc.saturating_mul(k as u128)))
            .collect();
        Self { radices, agent_counts }
    }

    pub fn num_agents(&self) -> usize {
        self.radices.len()
    }

    /// `|Π^i| = ∏_s |A^i(s)|` (saturating).
    pub fn agent_count(&self, i: usize) -> u128 {
        self.agent_counts[i]
    }

    /// `∏_i |Π^i|` (saturating).
    pub fn joint_count(&self) -> u128 {
        self.agent_counts.iter().fold(1u128, |a, &b| a.saturating_mul(b))
    }

    /// `∏_{j≠i} |Π^j|` (saturating).
    pub fn opponent_count(&self, i: usize) -> u128 {
        self.agent_counts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(1u128, |a, (_, &b)| a.saturating_mul(b))
    }

    /// Per-state action counts of agent `i`.
    pub fn radices(&self, i: usize) -> &[usize] {
        &self.radices[i]
    }

    pub fn encode_agent(&self, i: usize, policy: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (&a, &r) in policy.iter().zip(&self.radices[i]) {
            idx += a * stride;
            stride *= r;
        }
        idx
    }

    pub fn decode_agent(&self, i: usize, idx: usize) -> Vec<usize> {
        decode_mixed(idx, &self.radices[i])
    }

    fn small_counts(&self) -> Vec<usize> {
        self.agent_counts.iter().map(|&c| usize::try_from(c).expect("policy space too large")).collect()
    }

    /// Joint index of a deterministic joint policy. Panics if the space exceeds `usize`.
    pub fn encode(&self, pi: &DeterministicJointPolicy) -> usize {
        let counts = self.small_counts();
        let mut idx = 0;
        let mut stride = 1;
        for (i, &c) in counts.iter().enumerate() {
            idx += self.encode_agent(i, pi.agent(i)) * stride;
            stride *= c;
        }
        idx
    }

    /// Per-agent policy indices of a joint index.
    pub fn split(&self, idx: usize) -> Vec<usize> {
        decode_mixed(idx, &self.small_counts())
    }

    pub fn decode(&self, idx: usize) -> DeterministicJointPolicy {
        let choice = self.split(idx).into_iter().enumerate().map(|(i, p)| self.decode_agent(i, p)).collect();
        DeterministicJointPolicy { choice }
    }

    /// Index of the opponent profile of agent `i` (mixed radix over `j ≠ i`, ascending).
    pub fn opponent_index(&self, i: usize, agent_indices: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (j, &p) in agent_indices.iter().enumerate() {
            if j != i {
                idx += p * stride;
                stride *= self.agent_counts[j] as usize;
            }
        }
        idx
    }

    /// Per-agent policy indices for agents `≠ i` from an opponent index; agent `i`'s slot is 0.
    pub fn opponent_split(&self, i: usize, mut opp: usize) -> Vec<usize> {
        (0..self.num_agents())
            .map(|j| {
                if j == i {
                    0
                } else {
                    let c = self.agent_counts[j] as usize;
                    let d = opp % c;
                    opp /= c;
                    d
                }
            })
            .collect()
    }

    /// Joint policy whose agents `≠ i` follow opponent profile `opp` and agent `i` plays position 0.
    pub fn opponent_policy(&self, i: usize, opp: usize) -> DeterministicJointPolicy {
        let idx = self.opponent_split(i, opp);
        let choice = idx.into_iter().enumerate().map(|(j, p)| self.decode_agent(j, p)).collect();
        DeterministicJointPolicy { choice }
    }

    /// Uniform draw over joint policies, one action per (agent, state).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DeterministicJointPolicy {
        let choice = self.radices.iter().map(|r| r.iter().map(|&k| rng.gen_range(0..k)).collect()).collect();
        DeterministicJointPolicy { choice }
    }
}

/// Baseline joint policy mixed with uniform exploration of mass `ρ^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPolicy {
    pub baseline: DeterministicJointPolicy,
    pub rho: Vec<f64>,
}

impl BehaviorPolicy {
    pub fn new(baseline: DeterministicJointPolicy, rho: Vec<f64>) -> Self {
        assert_eq!(baseline.num_agents(), rho.len());
        Self { baseline, rho }
    }

    /// Probability that agent `i` plays position `pos` at `s`, where `A^i(s)` has `count` actions.
    pub fn prob(&self, i: usize, s: usize, pos: usize, count: usize) -> f64 {
        let explore = self.rho[i] / count as f64;
        if pos == self.baseline.action(i, s) {
            (1.0 - self.rho[i]) + explore
        } else {
            explore
        }
    }

    /// Action distribution of agent `i` at `s`.
    pub fn distribution(&self, game: &StochasticGame, i: usize, s: usize) -> Vec<f64> {
        let k = game.num_actions(i, s);
        (0..k).map(|p| self.prob(i, s, p, k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::build_gridworld;
    use proptest::prelude::*;

    #[test]
    fn gridworld_policy_counts() {
        let g = build_gridworld();
        let space = PolicySpace::new(&g);
        assert_eq!(space.agent_count(0), 1728);
        assert_eq!(space.agent_count(1), 1728);
        assert_eq!(space.joint_count(), 1728 * 1728);
    }

    #[test]
    fn joint_encoding_round_trips() {
        let g = build_gridworld();
        let space = PolicySpace::new(&g);
        for idx in [0usize, 1, 1727, 1728, 2_985_983, 1_234_567] {
            let pi = space.decode(idx);
            assert_eq!(space.encode(&pi), idx);
            let parts = space.split(idx);
            assert_eq!(space.opponent_index(0, &parts), parts[1]);
            assert_eq!(space.opponent_index(1, &parts), parts[0]);
        }
    }

    proptest! {
        #[test]
        fn behavior_masses_sum_to_one(rho in 0.001f64..0.999, k in 1usize..6, base in 0usize..6) {
            let g = build_gridworld();
            let base = base % k;
            let pi = DeterministicJointPolicy { choice: vec![vec![base; g.num_states()]; 2] };
            let bp = BehaviorPolicy::new(pi, vec![rho, rho]);
            let masses: Vec<f64> = (0..k).map(|p| bp.prob(0, 0, p, k)).collect();
            prop_assert!(masses.iter().all(|&m| m >= 0.0));
            prop_assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((masses[base] - ((1.0 - rho) + rho / k as f64)).abs() < 1e-15);
        }
    }
}
