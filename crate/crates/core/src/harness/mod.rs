//! Seeded batch experiments: repeated trials of a learner (or of the best reply process),
//! scored against a precomputed equilibrium set, with CSV output and a command line.

mod cache;
pub mod cli;
mod csv;
mod stats;

pub use cache::{game_hash, EquilibriumSet};
pub use csv::{write_long, write_summary, CSV_HEADER, LONG_HEADER};
pub use stats::{spearman, Spearman};

use crate::bounds::BoundsError;
use crate::brpi::{run_brpi, BrpiState};
use crate::features::{FeatureBasis, FeatureError};
use crate::game::{DeterministicJointPolicy, GameError, ParseError, PolicySpace, StochasticGame};
use crate::graph::{BestReplyTable, GraphError};
use crate::learner::{initial_policy, run, run_linear, AgentParams, PhaseConfig, Restart, StepSize};
use crate::oracle::{OracleError, ThetaBall};
use crate::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("cannot parse game: {0}")]
    Parse(#[from] ParseError),
    #[error("equilibrium cache {path} not found; precompute it with `decq equilibria --eq-set {mode} --out {path}`")]
    MissingCache { path: PathBuf, mode: String },
    #[error("equilibrium cache {path}: {reason}")]
    BadCache { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

impl HarnessError {
    /// 2 for configuration problems, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::Parse(_)
            | HarnessError::MissingCache { .. }
            | HarnessError::BadCache { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Tabular,
    Linear,
    Brpi,
}

impl Algo {
    pub fn label(&self) -> &'static str {
        match self {
            Algo::Tabular => "tabular",
            Algo::Linear => "linear",
            Algo::Brpi => "brpi",
        }
    }
}

/// What drives the joint policy from one phase to the next.
#[derive(Clone, Copy)]
pub enum Learner<'a> {
    Tabular,
    Linear { bases: &'a [Arc<FeatureBasis>], balls: &'a [ThetaBall] },
    /// Exact best replies; `T` is ignored.
    Brpi { table: &'a BestReplyTable },
}

impl Learner<'_> {
    pub fn algo(&self) -> Algo {
        match self {
            Learner::Tabular => Algo::Tabular,
            Learner::Linear { .. } => Algo::Linear,
            Learner::Brpi { .. } => Algo::Brpi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub k: usize,
    pub t: u64,
    pub trials: usize,
    pub master_seed: u64,
    pub rho: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub step: StepSize,
    pub restart: Restart,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.k == 0 {
            return bad("K must be at least 1");
        }
        if self.t == 0 {
            return bad("T must be at least 1");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0,1)");
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad("lambda must lie in (0,1)");
        }
        if !(self.zeta > 0.0) {
            return bad("zeta must be positive");
        }
        if let StepSize::Constant(eta) = self.step {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad("constant step size must lie in (0,1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    /// Joint indices of `π_1 … π_K`.
    pub policy_indices: Vec<usize>,
    pub in_eq: Vec<bool>,
}

impl TrialResult {
    pub fn hits(&self) -> usize {
        self.in_eq.iter().filter(|&&b| b).count()
    }

    /// `(1/K) Σ_{k=1}^K 1{π_k ∈ eq}`.
    pub fn fraction(&self) -> f64 {
        self.hits() as f64 / self.in_eq.len() as f64
    }

    pub fn final_in_eq(&self) -> bool {
        *self.in_eq.last().expect("K ≥ 1")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub algo: Algo,
    pub master_seed: u64,
    pub k: usize,
    pub t: u64,
    pub trials: Vec<TrialResult>,
}

impl ExperimentResult {
    fn fractions(&self) -> impl Iterator<Item = f64> + '_ {
        self.trials.iter().map(TrialResult::fraction)
    }

    pub fn mean_fraction(&self) -> f64 {
        self.fractions().sum::<f64>() / self.trials.len() as f64
    }

    pub fn min_fraction(&self) -> f64 {
        self.fractions().fold(f64::INFINITY, f64::min)
    }

    pub fn max_fraction(&self) -> f64 {
        self.fractions().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_rate(&self) -> f64 {
        self.trials.iter().filter(|t| t.final_in_eq()).count() as f64 / self.trials.len() as f64
    }
}

/// Seed of one trial. Every `(K, T)` cell draws fresh initial policies.
pub fn trial_seed(master: u64, k: usize, t: u64, trial: usize) -> u64 {
    derive_seed(master, &[k as u64, t, trial as u64])
}

fn run_trial(
    game: &StochasticGame,
    space: &PolicySpace,
    cfg: &ExperimentConfig,
    learner: Learner<'_>,
    eq: &EquilibriumSet,
    trial: usize,
) -> Result<TrialResult, HarnessError> {
    let seed = trial_seed(cfg.master_seed, cfg.k, cfg.t, trial);
    let n = game.num_agents();
    let params = vec![AgentParams { rho: cfg.rho, lambda: cfg.lambda, zeta: cfg.zeta, gamma: 0.0, step: cfg.step }; n];
    let phases = PhaseConfig::uniform(cfg.t, cfg.k);
    let policies: Vec<DeterministicJointPolicy> = match learner {
        Learner::Tabular => run(game, &params, None, &phases, seed, cfg.restart)?.0.baselines,
        Learner::Linear { bases, balls } => {
            run_linear(game, bases, Some(balls), &params, None, &phases, seed, cfg.restart)?.0.baselines
        }
        Learner::Brpi { table } => {
            let init = BrpiState::new(initial_policy(game, seed), vec![cfg.lambda; n]);
            run_brpi(init, table, cfg.k as u64, seed)?
        }
    };
    let policy_indices: Vec<usize> = policies[1..].iter().map(|p| space.encode(p)).collect();
    let in_eq = policy_indices.iter().map(|&u| eq.contains(u)).collect();
    Ok(TrialResult { trial, seed, policy_indices, in_eq })
}

/// Run `cfg.trials` independent trials in parallel; results are ordered by trial index and
/// do not depend on the number of worker threads.
pub fn run_experiment(
    game: &StochasticGame,
    cfg: &ExperimentConfig,
    learner: Learner<'_>,
    eq: &EquilibriumSet,
) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    if eq.game_hash() != game_hash(game) {
        return Err(HarnessError::Config("equilibrium set was computed for a different game".into()));
    }
    let space = PolicySpace::new(game);
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(game, &space, cfg, learner, eq, trial))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentResult { algo: learner.algo(), master_seed: cfg.master_seed, k: cfg.k, t: cfg.t, trials })
}

/// Parse `v`, `a,b,c` or `a:b` (the 1-2-5 grid between `a` and `b`, endpoints included).
pub fn parse_grid(spec: &str) -> Result<Vec<u64>, HarnessError> {
    let num = |s: &str| -> Result<u64, HarnessError> {
        s.trim().parse::<u64>().map_err(|_| HarnessError::Config(format!("cannot parse `{s}` as a positive integer")))
    };
    let values = if let Some((a, b)) = spec.split_once(':') {
        let (a, b) = (num(a)?, num(b)?);
        if a == 0 || a > b {
            return Err(HarnessError::Config(format!("range `{spec}` must satisfy 1 ≤ a ≤ b")));
        }
        let mut out = vec![a];
        let mut decade = 1u64;
        while decade <= b {
            for m in [1, 2, 5] {
                let v = m * decade;
                if v > a && v < b {
                    out.push(v);
                }
            }
            decade = match decade.checked_mul(10) {
                Some(d) => d,
                None => break,
            };
        }
        if b != a {
            out.push(b);
        }
        out
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.contains(&0) {
        return Err(HarnessError::Config("grid values must be at least 1".into()));
    }
    Ok(values)
}
