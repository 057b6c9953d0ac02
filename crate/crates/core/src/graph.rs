//! Strict-best-reply graphs over deterministic joint policies.
//!
//! Nodes are joint-policy indices of [`PolicySpace`]. Fix an agent `i` and an opponent
//! profile; the policies that differ only in agent `i`'s component form a *fiber*. Inside
//! a fiber every node whose agent-`i` policy is not a best reply has an edge to every node
//! whose agent-`i` policy is one, and there are no other edges. The graph is therefore
//! stored implicitly as one best-reply bit per (agent, node).

use crate::features::FeatureBasis;
use crate::game::{DeterministicJointPolicy, PolicySpace, StochasticGame};
use crate::greedy::GreedySet;
use crate::oracle::{
    linear_best_reply_set, InducedMdp, LinearSetup, OpponentPolicy, OracleError, DEFAULT_Q_TOL, DEFAULT_TIE_TOL,
};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;
use std::io::{self, Write};
use thiserror::Error;

pub const DEFAULT_NODE_BUDGET: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("the game has {nodes} joint policies, above the node budget of {budget}")]
    BudgetExceeded { nodes: u128, budget: u128 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("linear mode needs a feature basis for every agent")]
    MissingFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    Tabular,
    Linear,
}

/// Best-reply sets of every agent against every deterministic opponent profile.
#[derive(Debug, Clone)]
pub struct BestReplyTable {
    mode: GraphMode,
    space: PolicySpace,
    sets: Vec<Vec<GreedySet>>,
    values: Vec<Vec<Vec<f64>>>,
    always_tied: Vec<Vec<bool>>,
}

impl BestReplyTable {
    /// Exact tabular best replies `Π^i_{π^{-i}}` for every `i` and `π^{-i}`.
    pub fn tabular(game: &StochasticGame, tie_tol: f64, budget: u128) -> Result<Self, GraphError> {
        Self::build(game, None, tie_tol, budget)
    }

    /// Linear best replies `Π̃^i_{π^{-i}}` from the projections `θ_{π^{-i}}`.
    pub fn linear(game: &StochasticGame, setup: &LinearSetup, tie_tol: f64, budget: u128) -> Result<Self, GraphError> {
        if setup.bases.len() != game.num_agents() || setup.balls.len() != game.num_agents() {
            return Err(GraphError::MissingFeatures);
        }
        Self::build(game, Some(setup), tie_tol, budget)
    }

    fn build(game: &StochasticGame, linear: Option<&LinearSetup>, tie_tol: f64, budget: u128) -> Result<Self, GraphError> {
        let space = PolicySpace::new(game);
        let nodes = space.joint_count();
        if nodes > budget {
            return Err(GraphError::BudgetExceeded { nodes, budget });
        }
        let n = game.num_agents();
        let mut sets = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        let mut always_tied = Vec::with_capacity(n);
        for i in 0..n {
            let lin: Option<(&FeatureBasis, f64)> = linear.map(|s| (&s.bases[i], s.balls[i].radius));
            if let Some((basis, _)) = lin {
                if basis.agent() != i || basis.num_pairs() != game.num_pairs(i) {
                    return Err(OracleError::FeatureShape { agent: i, expected: game.num_pairs(i), got: basis.num_pairs() }.into());
                }
            }
            let per_opp: Vec<(GreedySet, Vec<f64>, Vec<bool>)> = (0..space.opponent_count(i) as usize)
                .into_par_iter()
                .map(|opp| {
                    let pi = space.opponent_policy(i, opp);
                    let q = InducedMdp::new(game, i, &OpponentPolicy::Deterministic(pi)).solve(DEFAULT_Q_TOL)?;
                    let set = match lin {
                        None => q.greedy_set(tie_tol),
                        Some((basis, radius)) => linear_best_reply_set(game, basis, &basis.project(q.values(), radius), tie_tol),
                    };
                    let v = (0..game.num_states()).map(|s| q.max_at(s)).collect();
                    let tied = q.rows().map(|row| row.iter().all(|x| (x - row[0]).abs() <= tie_tol)).collect();
                    Ok((set, v, tied))
                })
                .collect::<Result<_, OracleError>>()?;
            let mut tied = vec![true; game.num_states()];
            let mut s_i = Vec::with_capacity(per_opp.len());
            let mut v_i = Vec::with_capacity(per_opp.len());
            for (set, v, t) in per_opp {
                for (acc, x) in tied.iter_mut().zip(t) {
                    *acc &= x;
                }
                s_i.push(set);
                v_i.push(v);
            }
            sets.push(s_i);
            values.push(v_i);
            always_tied.push(tied);
        }
        Ok(Self { mode: if linear.is_some() { GraphMode::Linear } else { GraphMode::Tabular }, space, sets, values, always_tied })
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn space(&self) -> &PolicySpace {
        &self.space
    }

    /// Best replies of agent `i` to opponent profile index `opp`.
    pub fn set(&self, i: usize, opp: usize) -> &GreedySet {
        &self.sets[i][opp]
    }

    /// Best replies of agent `i` to the opponents in `pi`.
    pub fn best_reply(&self, i: usize, pi: &DeterministicJointPolicy) -> &GreedySet {
        let idx: Vec<usize> = (0..self.space.num_agents()).map(|j| self.space.encode_agent(j, pi.agent(j))).collect();
        &self.sets[i][self.space.opponent_index(i, &idx)]
    }

    /// `max_a Q*^i_{π^{-i}}(s, a)` per state: agent `i`'s optimal value against `opp`.
    pub fn optimal_values(&self, i: usize, opp: usize) -> &[f64] {
        &self.values[i][opp]
    }

    /// States where agent `i`'s optimal Q-values tie across all actions against every
    /// opponent profile, so its choice there never matters to its own value.
    pub fn always_tied(&self, i: usize) -> &[bool] {
        &self.always_tied[i]
    }
}

/// Outcome of the weak-acyclicity check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Acyclicity {
    pub weakly_acyclic: bool,
    /// Longest shortest path to an equilibrium, when every node reaches one.
    pub l: Option<usize>,
    /// A node with no strict best reply path to an equilibrium.
    pub witness: Option<usize>,
}

const UNREACHED: u32 = u32::MAX;

/// Implicit strict-best-reply graph with distances to the equilibrium set.
#[derive(Debug, Clone)]
pub struct BestReplyGraph {
    table: BestReplyTable,
    counts: Vec<usize>,
    strides: Vec<usize>,
    /// `br[i][opp * counts[i] + p]`: agent-`i` policy `p` is a best reply to `opp`.
    br: Vec<Vec<bool>>,
    equilibria: Vec<usize>,
    dist: Vec<u32>,
}

impl BestReplyGraph {
    pub fn build(game: &StochasticGame, mode: GraphMode, linear: Option<&LinearSetup>, budget: u128) -> Result<Self, GraphError> {
        let table = match (mode, linear) {
            (GraphMode::Tabular, _) => BestReplyTable::tabular(game, DEFAULT_TIE_TOL, budget)?,
            (GraphMode::Linear, Some(setup)) => BestReplyTable::linear(game, setup, DEFAULT_TIE_TOL, budget)?,
            (GraphMode::Linear, None) => return Err(GraphError::MissingFeatures),
        };
        Ok(Self::from_table(table))
    }

    pub fn from_table(table: BestReplyTable) -> Self {
        let space = &table.space;
        let n = space.num_agents();
        let counts: Vec<usize> = (0..n).map(|i| space.agent_count(i) as usize).collect();
        let mut strides = vec![1usize; n];
        for i in 1..n {
            strides[i] = strides[i - 1] * counts[i - 1];
        }
        let br: Vec<Vec<bool>> = (0..n)
            .map(|i| {
                let c = counts[i];
                table.sets[i]
                    .par_iter()
                    .flat_map_iter(|set| (0..c).map(move |p| set.contains(&space.decode_agent(i, p))))
                    .collect()
            })
            .collect();
        let mut g = Self { table, counts, strides, br, equilibria: Vec::new(), dist: Vec::new() };
        let total = g.num_nodes();
        g.equilibria = (0..total).into_par_iter().filter(|&u| g.is_equilibrium(u)).collect();
        g.dist = g.reverse_bfs();
        g
    }

    pub fn table(&self) -> &BestReplyTable {
        &self.table
    }

    pub fn mode(&self) -> GraphMode {
        self.table.mode
    }

    pub fn space(&self) -> &PolicySpace {
        &self.table.space
    }

    pub fn num_nodes(&self) -> usize {
        self.counts.iter().product()
    }

    /// Agent `i`'s policy index in node `u`.
    pub fn component(&self, u: usize, i: usize) -> usize {
        u / self.strides[i] % self.counts[i]
    }

    fn opponent_of(&self, u: usize, i: usize) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for j in 0..self.counts.len() {
            if j != i {
                idx += self.component(u, j) * stride;
                stride *= self.counts[j];
            }
        }
        idx
    }

    /// Whether agent `i` plays a best reply at node `u`.
    pub fn is_best_reply(&self, u: usize, i: usize) -> bool {
        self.br[i][self.opponent_of(u, i) * self.counts[i] + self.component(u, i)]
    }

    /// Zero out-degree: every agent plays a best reply.
    pub fn is_equilibrium(&self, u: usize) -> bool {
        (0..self.counts.len()).all(|i| self.is_best_reply(u, i))
    }

    /// Nodes of the fiber of agent `i` through `u`, in policy-index order.
    fn fiber(&self, u: usize, i: usize) -> impl Iterator<Item = usize> {
        let base = u - self.component(u, i) * self.strides[i];
        let stride = self.strides[i];
        (0..self.counts[i]).map(move |p| base + p * stride)
    }

    /// Out-neighbors of `u` in ascending order.
    pub fn out_neighbors(&self, u: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for i in 0..self.counts.len() {
            if !self.is_best_reply(u, i) {
                out.extend(self.fiber(u, i).filter(|&v| self.is_best_reply(v, i)));
            }
        }
        out.sort_unstable();
        out
    }

    fn reverse_bfs(&self) -> Vec<u32> {
        let n = self.counts.len();
        let mut dist = vec![UNREACHED; self.num_nodes()];
        let mut activated: Vec<Vec<bool>> = (0..n).map(|i| vec![false; self.table.sets[i].len()]).collect();
        let mut queue = VecDeque::new();
        for &e in &self.equilibria {
            dist[e] = 0;
            queue.push_back(e);
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v] + 1;
            for i in 0..n {
                // v has in-edges along fiber i only if agent i best-replies at v.
                if !self.is_best_reply(v, i) {
                    continue;
                }
                let opp = self.opponent_of(v, i);
                if std::mem::replace(&mut activated[i][opp], true) {
                    continue;
                }
                for u in self.fiber(v, i) {
                    if dist[u] == UNREACHED && !self.br[i][opp * self.counts[i] + self.component(u, i)] {
                        dist[u] = d;
                        queue.push_back(u);
                    }
                }
            }
        }
        dist
    }

    /// Zero out-degree nodes, ascending.
    pub fn equilibria(&self) -> &[usize] {
        &self.equilibria
    }

    /// Hop count of the shortest strict best reply path from `u` to an equilibrium.
    pub fn path_len(&self, u: usize) -> Option<usize> {
        (self.dist[u] != UNREACHED).then_some(self.dist[u] as usize)
    }

    pub fn certify_weak_acyclicity(&self) -> Acyclicity {
        match self.dist.iter().position(|&d| d == UNREACHED) {
            Some(w) => Acyclicity { weakly_acyclic: false, l: None, witness: Some(w) },
            None => Acyclicity {
                weakly_acyclic: true,
                l: Some(self.dist.iter().copied().max().unwrap_or(0) as usize),
                witness: None,
            },
        }
    }

    /// Equilibria whose value to every agent at every state is the largest any equilibrium
    /// attains there.
    pub fn optimal_equilibria(&self) -> Vec<usize> {
        let n = self.counts.len();
        let value = |u: usize, i: usize| self.table.optimal_values(i, self.opponent_of(u, i));
        let ns = value(self.equilibria.first().copied().unwrap_or(0), 0).len();
        let mut best = vec![vec![f64::NEG_INFINITY; ns]; n];
        for &u in &self.equilibria {
            for (i, b) in best.iter_mut().enumerate() {
                for (x, y) in b.iter_mut().zip(value(u, i)) {
                    *x = x.max(*y);
                }
            }
        }
        self.equilibria
            .iter()
            .copied()
            .filter(|&u| (0..n).all(|i| value(u, i).iter().zip(&best[i]).all(|(v, b)| *v >= b - DEFAULT_TIE_TOL)))
            .collect()
    }

    /// Number of distinct classes among `nodes` after forgetting each agent's action at
    /// states where its Q-values are always tied.
    pub fn count_modulo_inert(&self, nodes: &[usize]) -> usize {
        let space = self.space();
        let mut keys: Vec<Vec<usize>> = nodes
            .iter()
            .map(|&u| {
                let pi = space.decode(u);
                (0..self.counts.len())
                    .flat_map(|i| {
                        let tied = self.table.always_tied(i);
                        pi.agent(i).iter().zip(tied).map(|(&a, &t)| if t { usize::MAX } else { a }).collect::<Vec<_>>()
                    })
                    .collect()
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }

    /// Materialize the edges (small graphs only).
    pub fn to_explicit(&self) -> ExplicitGraph {
        ExplicitGraph::new((0..self.num_nodes()).map(|u| self.out_neighbors(u)).collect())
    }

    /// One line per node: the node index followed by its out-neighbors.
    pub fn write_adjacency<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for u in 0..self.num_nodes() {
            write_line(w, u, &self.out_neighbors(u))?;
        }
        Ok(())
    }
}

fn write_line<W: Write>(w: &mut W, u: usize, out: &[usize]) -> io::Result<()> {
    write!(w, "{u}")?;
    for v in out {
        write!(w, " {v}")?;
    }
    writeln!(w)
}

/// A directed graph given by adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitGraph {
    adj: Vec<Vec<usize>>,
}

impl ExplicitGraph {
    pub fn new(adj: Vec<Vec<usize>>) -> Self {
        Self { adj }
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adj
    }

    pub fn equilibria(&self) -> Vec<usize> {
        (0..self.adj.len()).filter(|&u| self.adj[u].is_empty()).collect()
    }

    /// Reverse breadth-first search from the sinks.
    pub fn distances(&self) -> Vec<Option<usize>> {
        let mut rev = vec![Vec::new(); self.adj.len()];
        for (u, out) in self.adj.iter().enumerate() {
            for &v in out {
                rev[v].push(u);
            }
        }
        let mut dist = vec![None; self.adj.len()];
        let mut queue = VecDeque::new();
        for e in self.equilibria() {
            dist[e] = Some(0);
            queue.push_back(e);
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap() + 1;
            for &u in &rev[v] {
                if dist[u].is_none() {
                    dist[u] = Some(d);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    pub fn certify_weak_acyclicity(&self) -> Acyclicity {
        let dist = self.distances();
        match dist.iter().position(Option::is_none) {
            Some(w) => Acyclicity { weakly_acyclic: false, l: None, witness: Some(w) },
            None => Acyclicity { weakly_acyclic: true, l: dist.iter().flatten().copied().max().or(Some(0)), witness: None },
        }
    }

    pub fn write_adjacency<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for (u, out) in self.adj.iter().enumerate() {
            write_line(w, u, out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_gridworld, testing::random_game};
    use crate::oracle::best_reply_set;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Forward BFS from every node, independent of the reverse search.
    fn forward_distance(g: &ExplicitGraph, u: usize) -> Option<usize> {
        let sinks = g.equilibria();
        let mut seen = vec![false; g.adjacency().len()];
        let mut queue = VecDeque::from([(u, 0)]);
        seen[u] = true;
        while let Some((v, d)) = queue.pop_front() {
            if sinks.contains(&v) {
                return Some(d);
            }
            for &w in &g.adjacency()[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back((w, d + 1));
                }
            }
        }
        None
    }

    fn identical_interest(payoff: [[f64; 2]; 2]) -> StochasticGame {
        StochasticGame::from_fn(
            vec!["x".into()],
            vec![vec!["a".into(), "b".into()], vec!["c".into(), "d".into()]],
            vec![vec![vec![0, 1]], vec![vec![0, 1]]],
            vec![0.5, 0.5],
            |_, j| (vec![1.0], vec![payoff[j[0]][j[1]]; 2]),
        )
        .unwrap()
    }

    #[test]
    fn identical_interest_with_unique_optimum() {
        let g = identical_interest([[1.0, 0.0], [0.0, 0.5]]);
        let graph = BestReplyGraph::build(&g, GraphMode::Tabular, None, DEFAULT_NODE_BUDGET).unwrap();
        // (a,c) and (b,d) are both equilibria of this coordination game; the unique strict
        // optimum is (a,c).
        assert_eq!(graph.equilibria(), &[0, 3]);
        assert_eq!(graph.optimal_equilibria(), vec![0]);
        let acyc = graph.certify_weak_acyclicity();
        assert!(acyc.weakly_acyclic && acyc.l.unwrap() <= 2);
    }

    #[test]
    fn identical_payoffs_make_every_node_an_equilibrium() {
        let g = identical_interest([[1.0, 1.0], [1.0, 1.0]]);
        let graph = BestReplyGraph::build(&g, GraphMode::Tabular, None, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(graph.equilibria(), &[0, 1, 2, 3]);
        assert_eq!(graph.certify_weak_acyclicity().l, Some(0));
    }

    #[test]
    fn single_agent_equilibria_are_optimal_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_game(&mut rng, 1, 3, 3);
        let graph = BestReplyGraph::build(&g, GraphMode::Tabular, None, DEFAULT_NODE_BUDGET).unwrap();
        let set = best_reply_set(&g, 0, &OpponentPolicy::Deterministic(graph.space().decode(0)), DEFAULT_TIE_TOL).unwrap();
        for u in 0..graph.num_nodes() {
            assert_eq!(graph.is_equilibrium(u), set.contains(graph.space().decode(u).agent(0)));
            assert!(graph.path_len(u).unwrap() <= 1);
        }
    }

    #[test]
    fn matching_pennies_has_no_equilibrium() {
        let g = StochasticGame::from_fn(
            vec!["x".into()],
            vec![vec!["h".into(), "t".into()], vec!["h".into(), "t".into()]],
            vec![vec![vec![0, 1]], vec![vec![0, 1]]],
            vec![0.5, 0.5],
            |_, j| {
                let m = if j[0] == j[1] { 1.0 } else { -1.0 };
                (vec![1.0], vec![m, -m])
            },
        )
        .unwrap();
        let graph = BestReplyGraph::build(&g, GraphMode::Tabular, None, DEFAULT_NODE_BUDGET).unwrap();
        let acyc = graph.certify_weak_acyclicity();
        assert!(!acyc.weakly_acyclic);
        assert!(acyc.witness.is_some());
        assert!(graph.equilibria().is_empty());
    }

    #[test]
    fn implicit_search_matches_forward_bfs() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let n = 2 + (rand::Rng::gen_range(&mut rng, 0..2));
            let g = random_game(&mut rng, n, 2, 2);
            let graph = BestReplyGraph::build(&g, GraphMode::Tabular, None, DEFAULT_NODE_BUDGET).unwrap();
            let explicit = graph.to_explicit();
            assert_eq!(explicit.equilibria(), graph.equilibria());
            for u in 0..graph.num_nodes() {
                assert_eq!(graph.path_len(u), forward_distance(&explicit, u));
                // Every edge moves exactly one agent, into its best-reply set, out of a
                // non-best reply.
                for &v in &explicit.adjacency()[u] {
                    let moved: Vec<usize> = (0..n).filter(|&i| graph.component(u, i) != graph.component(v, i)).collect();
                    assert_eq!(moved.len(), 1);
                    assert!(!graph.is_best_reply(u, moved[0]) && graph.is_best_reply(v, moved[0]));
                }
            }
            assert_eq!(graph.certify_weak_acyclicity(), explicit.certify_weak_acyclicity());
        }
    }

    #[test]
    fn budget_is_enforced() {
        let g = build_gridworld();
        let err = BestReplyTable::tabular(&g, DEFAULT_TIE_TOL, 1000).unwrap_err();
        assert!(matches!(err, GraphError::BudgetExceeded { nodes: 2985984, budget: 1000 }));
    }

    #[test]
    fn adjacency_export() {
        let g = ExplicitGraph::new(vec![vec![1, 2], vec![], vec![1]]);
        let mut out = Vec::new();
        g.write_adjacency(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0 1 2\n1\n2 1\n");
    }
}
