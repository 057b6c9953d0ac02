//! Structural checks and reachability diagnostics.

use super::StochasticGame;
use std::fmt;

/// Absolute tolerance on kernel row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}: {}", self.location, self.message)
    }
}

/// Smallest horizon `H` at which every state reaches every state with probability at
/// least `κ` under some joint-action plan, and that `κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reachability {
    pub horizon: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
    pub reachability: Option<Reachability>,
    pub max_horizon: usize,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }
}

/// Validate with the default reachability horizon `max(2|S|, 4)`.
pub fn validate_game(game: &StochasticGame) -> ValidationReport {
    validate_game_with(game, (2 * game.num_states()).max(4))
}

pub fn validate_game_with(game: &StochasticGame, max_horizon: usize) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |severity, location: String, message: String| issues.push(Issue { severity, location, message });

    for i in 0..game.num_agents() {
        let g = game.discount(i);
        if !(g > 0.0 && g < 1.0) {
            push(Severity::Error, format!("agent {}", i + 1), format!("discount {g} outside (0,1)"));
        }
    }
    let mut kernel_ok = true;
    for s in 0..game.num_states() {
        for ja in 0..game.joint_count(s) {
            let loc = || joint_location(game, s, ja);
            let row = game.row(s, ja);
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                kernel_ok = false;
                push(Severity::Error, loc(), "negative or non-finite transition probability".into());
            }
            let sum: f64 = row.iter().sum();
            if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
                kernel_ok = false;
                push(Severity::Error, loc(), format!("row not stochastic (sum = {sum})"));
            }
            if game.rewards_at(s, ja).iter().any(|r| !r.is_finite()) {
                push(Severity::Error, loc(), "non-finite reward".into());
            }
        }
    }

    let mut reach = None;
    if kernel_ok {
        reach = reachability(game, max_horizon);
        if reach.is_none() {
            push(
                Severity::Warning,
                "kernel".into(),
                format!("reachability fails: no horizon H <= {max_horizon} lets every state reach every state"),
            );
        }
        let support = support_graph(game);
        let closed = closed_classes(&support);
        if closed.len() != 1 || closed[0].len() != game.num_states() {
            push(
                Severity::Warning,
                "kernel".into(),
                "chain under uniformly random joint play is reducible".into(),
            );
        }
        for class in &closed {
            let p = period(&support, class);
            if p > 1 {
                push(
                    Severity::Warning,
                    format!("state {}", game.state_name(class[0])),
                    format!("chain under uniformly random joint play is periodic (period {p})"),
                );
            }
        }
    }

    let ok = !issues.iter().any(|i| i.severity == Severity::Error);
    ValidationReport { ok, issues, reachability: reach, max_horizon }
}

fn joint_location(game: &StochasticGame, s: usize, ja: usize) -> String {
    let names: Vec<&str> =
        game.decode_joint(s, ja).iter().enumerate().map(|(i, &p)| game.action_name(i, s, p)).collect();
    format!("state {}, joint ({})", game.state_name(s), names.join(","))
}

/// Smallest `H ≤ max_horizon` with `κ_H = min_{s,s'} max_plan P(s_H = s' | s_0 = s) > 0`.
///
/// Plans may depend on the current state and step (the maximum is taken by backward
/// dynamic programming), which dominates open-loop action sequences.
pub fn reachability(game: &StochasticGame, max_horizon: usize) -> Option<Reachability> {
    let n = game.num_states();
    // v[s * n + target] = best probability of sitting at `target` after h steps from s.
    let mut v: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    for h in 0..=max_horizon {
        let kappa = v.iter().cloned().fold(f64::INFINITY, f64::min);
        if kappa > 0.0 {
            return Some(Reachability { horizon: h, kappa });
        }
        let mut next = vec![0.0; n * n];
        for s in 0..n {
            for ja in 0..game.joint_count(s) {
                let row = game.row(s, ja);
                for t in 0..n {
                    let p: f64 = row.iter().enumerate().map(|(u, &q)| q * v[u * n + t]).sum();
                    if p > next[s * n + t] {
                        next[s * n + t] = p;
                    }
                }
            }
        }
        v = next;
    }
    None
}

fn support_graph(game: &StochasticGame) -> Vec<Vec<usize>> {
    (0..game.num_states())
        .map(|s| {
            (0..game.num_states())
                .filter(|&t| (0..game.joint_count(s)).any(|ja| game.row(s, ja)[t] > 0.0))
                .collect()
        })
        .collect()
}

fn reach_sets(adj: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Closed communicating classes of a directed graph.
pub(crate) fn closed_classes(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let reach = reach_sets(adj);
    let n = adj.len();
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if assigned[s] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&t| reach[s][t] && reach[t][s]).collect();
        for &t in &class {
            assigned[t] = true;
        }
        let closed = class.iter().all(|&u| (0..n).all(|t| !reach[u][t] || class.contains(&t)));
        if closed {
            out.push(class);
        }
    }
    out
}

/// Period of a strongly connected class.
pub(crate) fn period(adj: &[Vec<usize>], class: &[usize]) -> usize {
    let mut level = vec![usize::MAX; adj.len()];
    level[class[0]] = 0;
    let mut queue = std::collections::VecDeque::from([class[0]]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if !class.contains(&w) {
                continue;
            }
            if level[w] == usize::MAX {
                level[w] = level[u] + 1;
                queue.push_back(w);
            } else {
                g = gcd(g, (level[u] + 1).abs_diff(level[w]));
            }
        }
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
