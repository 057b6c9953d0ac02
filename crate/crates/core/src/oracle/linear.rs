//! Feature-space projections of optimal Q-functions and the induced best replies.

use super::{optimal_q, OpponentPolicy, OracleError, QTable, DEFAULT_Q_TOL};
use crate::features::FeatureBasis;
use crate::game::StochasticGame;
use crate::greedy::GreedySet;
use serde::Serialize;

/// Origin-centered L2 ball `{θ : ‖θ‖₂ ≤ radius}` (diameter `2·radius`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaBall {
    pub radius: f64,
}

impl ThetaBall {
    pub fn new(radius: f64) -> Self {
        Self { radius }
    }

    /// A radius large enough that every table inside the agent's value range projects
    /// to an interior point: `√m · V_max / σ_min(Φ)` with
    /// `V_max = max(|r_min|, |r_max|)/(1−γ)` and `m` the number of (state, action) pairs.
    pub fn default_for(game: &StochasticGame, basis: &FeatureBasis) -> Self {
        let i = basis.agent();
        let (lo, hi) = game.reward_bounds(i);
        let vmax = lo.abs().max(hi.abs()) / (1.0 - game.discount(i));
        let m = basis.num_pairs() as f64;
        Self { radius: m.sqrt() * vmax / basis.sigma_min() }
    }

    /// The value-scale ball of radius `V_max = max(|r_min|, |r_max|)/(1−γ)` (1 when all
    /// rewards vanish). With feature rows of norm at most 1 every `φᵀθ` stays within
    /// `[−V_max, V_max]`, and the projection is regularized toward well-conditioned
    /// directions of `Φ`, which is where stochastic updates make progress.
    pub fn value_scale(game: &StochasticGame, i: usize) -> Self {
        let (lo, hi) = game.reward_bounds(i);
        let vmax = lo.abs().max(hi.abs()) / (1.0 - game.discount(i));
        Self { radius: if vmax > 0.0 { vmax } else { 1.0 } }
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    /// Radial scaling onto the ball.
    pub fn project(&self, theta: &mut [f64]) {
        let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > self.radius {
            let c = self.radius / norm;
            theta.iter_mut().for_each(|x| *x *= c);
        }
    }
}

fn check_shape(game: &StochasticGame, i: usize, basis: &FeatureBasis) -> Result<(), OracleError> {
    let expected = game.num_pairs(i);
    if basis.agent() != i || basis.num_pairs() != expected {
        return Err(OracleError::FeatureShape { agent: i, expected, got: basis.num_pairs() });
    }
    Ok(())
}

/// `θ_{π^{-i}} = argmin_{θ ∈ ball} ‖Q*_{π^{-i}} − Φθ‖₂²`.
pub fn linear_projection(
    game: &StochasticGame,
    i: usize,
    basis: &FeatureBasis,
    opp: &OpponentPolicy,
    ball: ThetaBall,
) -> Result<Vec<f64>, OracleError> {
    check_shape(game, i, basis)?;
    let q = optimal_q(game, i, opp, DEFAULT_Q_TOL)?;
    Ok(basis.project(q.values(), ball.radius))
}

/// `Φθ` as a Q-table.
pub fn projected_q(game: &StochasticGame, basis: &FeatureBasis, theta: &[f64]) -> QTable {
    basis.q_values(game, theta)
}

/// Per-state maximizers of `φ(s,·)ᵀθ` within `tie_tol`.
pub fn linear_best_reply_set(game: &StochasticGame, basis: &FeatureBasis, theta: &[f64], tie_tol: f64) -> GreedySet {
    projected_q(game, basis, theta).greedy_set(tie_tol)
}
