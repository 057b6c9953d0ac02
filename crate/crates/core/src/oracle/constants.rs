//! Game constants the convergence theory is stated in: minimum separations, policy
//! perturbation gaps and the Bellman error of the best linear fit.

use super::{InducedMdp, OpponentPolicy, OracleError, ProductPolicy, QTable, DEFAULT_Q_TOL, DEFAULT_TIE_TOL};
use super::linear::ThetaBall;
use crate::features::FeatureBasis;
use crate::game::{BehaviorPolicy, DeterministicJointPolicy, PolicySpace, StochasticGame};
use crate::rng::stream;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

/// Whether every opponent profile was scanned or only a uniform sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone)]
pub struct ConstantsConfig {
    /// Exploration probabilities; they define the perturbation set and the behavior
    /// opponents entering `b`.
    pub rho: Vec<f64>,
    /// Exact scan when `|Π^{-i}|` is at most this, else this many uniform samples.
    pub budget: u64,
    /// Q-value differences at or below this count as ties.
    pub tie_tol: f64,
    pub q_tol: f64,
    /// Seed for sampled scans.
    pub seed: u64,
}

impl ConstantsConfig {
    pub fn new(rho: Vec<f64>) -> Self {
        Self { rho, budget: 100_000, tie_tol: DEFAULT_TIE_TOL, q_tol: DEFAULT_Q_TOL, seed: 0 }
    }
}

/// Per-agent features and parameter domains for the linear constants.
#[derive(Debug, Clone)]
pub struct LinearSetup {
    pub bases: Vec<FeatureBasis>,
    pub balls: Vec<ThetaBall>,
}

impl LinearSetup {
    /// Each agent's ball defaults to [`ThetaBall::default_for`].
    pub fn with_default_balls(game: &StochasticGame, bases: Vec<FeatureBasis>) -> Self {
        let balls = bases.iter().map(|b| ThetaBall::default_for(game, b)).collect();
        Self { bases, balls }
    }

    /// Each agent's ball is [`ThetaBall::value_scale`].
    pub fn with_value_balls(game: &StochasticGame, bases: Vec<FeatureBasis>) -> Self {
        let balls = bases.iter().map(|b| ThetaBall::value_scale(game, b.agent())).collect();
        Self { bases, balls }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstants {
    /// `None` when every projected Q-function is flat across actions.
    pub zeta_bar_theta: Option<f64>,
    pub gamma_cap_tilde: f64,
    /// Largest Bellman residual `‖Φθ* − 𝒯(Φθ*)‖₂` over deterministic and behavior
    /// opponents, evaluated at the projection `θ*` of the optimal Q-function. This bounds
    /// the minimum over the domain from above.
    pub bellman_error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameConstants {
    pub zeta_bar: f64,
    pub gamma_cap: f64,
    pub linear: Option<LinearConstants>,
    pub gamma_max: f64,
    pub gamma_min: f64,
    pub r_min: Vec<f64>,
    pub r_max: Vec<f64>,
    pub mode: ScanMode,
    /// Opponent profiles scanned per agent.
    pub scanned: Vec<u64>,
}

#[derive(Debug, Clone, Copy)]
struct Scan {
    zeta: f64,
    gamma: f64,
    zeta_theta: f64,
    gamma_tilde: f64,
    b: f64,
}

impl Scan {
    const EMPTY: Scan =
        Scan { zeta: f64::INFINITY, gamma: 0.0, zeta_theta: f64::INFINITY, gamma_tilde: 0.0, b: 0.0 };

    fn merge(self, o: Scan) -> Scan {
        Scan {
            zeta: self.zeta.min(o.zeta),
            gamma: self.gamma.max(o.gamma),
            zeta_theta: self.zeta_theta.min(o.zeta_theta),
            gamma_tilde: self.gamma_tilde.max(o.gamma_tilde),
            b: self.b.max(o.b),
        }
    }
}

/// Smallest pairwise gap above `tol` among the actions of any state.
fn min_gap(q: &QTable, tol: f64) -> f64 {
    let mut best = f64::INFINITY;
    for row in q.rows() {
        for (k, x) in row.iter().enumerate() {
            for y in &row[k + 1..] {
                let d = (x - y).abs();
                if d > tol && d < best {
                    best = d;
                }
            }
        }
    }
    best
}

/// Mixture weights `a_J` over proper subsets `J` of the opponents (bit `k` of the mask
/// marks `others[k] ∈ J`, i.e. that opponent plays its baseline).
fn subset_weights(others: &[usize], rho: &[f64]) -> Vec<(usize, f64)> {
    let all_base: f64 = others.iter().map(|&j| 1.0 - rho[j]).product();
    let norm = 1.0 - all_base;
    let full = (1usize << others.len()) - 1;
    (0..full)
        .map(|mask| {
            let num: f64 = others
                .iter()
                .enumerate()
                .map(|(k, &j)| if mask >> k & 1 == 1 { 1.0 - rho[j] } else { rho[j] })
                .product();
            (mask, num / norm)
        })
        .collect()
}

/// The finite perturbation set for agent `i` around baselines `pi`: the mixture over
/// proper subsets `J` of opponents playing `pi`, the rest uniform.
pub fn delta_bar_mixture(game: &StochasticGame, i: usize, pi: &DeterministicJointPolicy, rho: &[f64]) -> OpponentPolicy {
    let others: Vec<usize> = (0..game.num_agents()).filter(|&j| j != i).collect();
    let parts = subset_weights(&others, rho)
        .into_iter()
        .map(|(mask, w)| {
            let base: Vec<usize> = others.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &j)| j).collect();
            (w, ProductPolicy::baseline_or_uniform(game, pi, &base))
        })
        .collect();
    OpponentPolicy::Mixture(parts)
}

/// `max_{φ ∈ Δ̄^{-i}} ‖𝒯_{π^{-i}}(Q) − 𝒯_φ(Q)‖_∞`.
///
/// `𝒯_φ(Q)(s,·)` depends on the baselines inside `φ` only through their actions at `s`,
/// so the maximum over the finite set splits into a per-state maximum over local
/// baseline profiles.
fn perturbation_gap(game: &StochasticGame, i: usize, q: &QTable, pi: &DeterministicJointPolicy, rho: &[f64]) -> f64 {
    let n = game.num_agents();
    if n == 1 {
        return 0.0;
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let weights = subset_weights(&others, rho);
    let gamma = game.discount(i);
    let v: Vec<f64> = (0..game.num_states()).map(|s| q.max_at(s)).collect();
    let mut worst = 0.0f64;
    for s in 0..game.num_states() {
        let jc = game.joint_count(s);
        let joints: Vec<Vec<usize>> = (0..jc).map(|ja| game.decode_joint(s, ja)).collect();
        let cont: Vec<f64> = (0..jc)
            .map(|ja| game.reward(i, s, ja) + gamma * game.row(s, ja).iter().zip(&v).map(|(p, x)| p * x).sum::<f64>())
            .collect();
        let counts: Vec<usize> = others.iter().map(|&j| game.num_actions(j, s)).collect();
        let na = game.num_actions(i, s);
        let mut at_pi = vec![0.0; na];
        for (ja, joint) in joints.iter().enumerate() {
            if others.iter().all(|&j| joint[j] == pi.action(j, s)) {
                at_pi[joint[i]] = cont[ja];
            }
        }
        let profiles: usize = counts.iter().product();
        for b in 0..profiles {
            let local = crate::game::decode_mixed(b, &counts);
            let mut at_phi = vec![0.0; na];
            for (ja, joint) in joints.iter().enumerate() {
                let w: f64 = weights
                    .iter()
                    .map(|&(mask, a)| {
                        a * others
                            .iter()
                            .enumerate()
                            .map(|(k, &j)| {
                                if mask >> k & 1 == 1 {
                                    if joint[j] == local[k] { 1.0 } else { 0.0 }
                                } else {
                                    1.0 / counts[k] as f64
                                }
                            })
                            .product::<f64>()
                    })
                    .sum();
                at_phi[joint[i]] += w * cont[ja];
            }
            for a in 0..na {
                worst = worst.max((at_pi[a] - at_phi[a]).abs());
            }
        }
    }
    worst
}

fn l2_residual(mdp: &InducedMdp, q: &QTable) -> f64 {
    let t = mdp.apply(q);
    t.values().iter().zip(q.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn scan_one(
    game: &StochasticGame,
    i: usize,
    pi: &DeterministicJointPolicy,
    cfg: &ConstantsConfig,
    linear: Option<(&FeatureBasis, ThetaBall)>,
) -> Result<Scan, OracleError> {
    let mdp = InducedMdp::new(game, i, &OpponentPolicy::Deterministic(pi.clone()));
    let q = mdp.solve(cfg.q_tol)?;
    let mut out = Scan::EMPTY;
    out.zeta = min_gap(&q, cfg.tie_tol);
    out.gamma = perturbation_gap(game, i, &q, pi, &cfg.rho);
    if let Some((basis, ball)) = linear {
        let qt = basis.q_values(game, &basis.project(q.values(), ball.radius));
        out.zeta_theta = min_gap(&qt, cfg.tie_tol);
        out.gamma_tilde = perturbation_gap(game, i, &qt, pi, &cfg.rho);
        let behavior = InducedMdp::new(game, i, &OpponentPolicy::Behavior(BehaviorPolicy::new(pi.clone(), cfg.rho.clone())));
        let qb = behavior.solve(cfg.q_tol)?;
        let qbt = basis.q_values(game, &basis.project(qb.values(), ball.radius));
        out.b = l2_residual(&mdp, &qt).max(l2_residual(&behavior, &qbt));
    }
    Ok(out)
}

/// Scan deterministic opponent profiles of every agent and collect the constants.
pub fn game_constants(
    game: &StochasticGame,
    cfg: &ConstantsConfig,
    linear: Option<&LinearSetup>,
) -> Result<GameConstants, OracleError> {
    let n = game.num_agents();
    let space = PolicySpace::new(game);
    let mut total = Scan::EMPTY;
    let mut mode = ScanMode::Exact;
    let mut scanned = Vec::with_capacity(n);
    for i in 0..n {
        let lin = match linear {
            Some(setup) => {
                let basis = &setup.bases[i];
                if basis.agent() != i || basis.num_pairs() != game.num_pairs(i) {
                    return Err(OracleError::FeatureShape { agent: i, expected: game.num_pairs(i), got: basis.num_pairs() });
                }
                Some((basis, setup.balls[i]))
            }
            None => None,
        };
        let count = space.opponent_count(i);
        let profiles: Vec<DeterministicJointPolicy> = if count <= cfg.budget as u128 {
            (0..count as usize).map(|k| space.opponent_policy(i, k)).collect()
        } else {
            mode = ScanMode::Sampled;
            let mut rng = stream(cfg.seed, &[0xC0_5747, i as u64]);
            (0..cfg.budget).map(|_| space.sample(&mut rng)).collect()
        };
        scanned.push(profiles.len() as u64);
        let agent = profiles
            .par_iter()
            .map(|pi| scan_one(game, i, pi, cfg, lin))
            .try_reduce(|| Scan::EMPTY, |a, b| Ok(a.merge(b)))?;
        total = total.merge(agent);
    }
    if !total.zeta.is_finite() {
        return Err(OracleError::DegenerateZetaBar);
    }
    let (r_min, r_max): (Vec<f64>, Vec<f64>) = (0..n).map(|i| game.reward_bounds(i)).unzip();
    let discounts = game.discounts();
    Ok(GameConstants {
        zeta_bar: total.zeta,
        gamma_cap: total.gamma,
        linear: linear.map(|_| LinearConstants {
            zeta_bar_theta: total.zeta_theta.is_finite().then_some(total.zeta_theta),
            gamma_cap_tilde: total.gamma_tilde,
            bellman_error_bound: total.b,
        }),
        gamma_max: discounts.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        gamma_min: discounts.iter().cloned().fold(f64::INFINITY, f64::min),
        r_min,
        r_max,
        mode,
        scanned,
    })
}

/// Largest sampled value over unit vectors θ of
/// `γ²·E_μ[max_a (φ(s,a)ᵀθ)²] − E_μ[(φ(s,a)ᵀθ)²]`, where `mu_pairs` is a distribution
/// over the agent's (state, action) pairs. A nonpositive result means the condition holds
/// for every `ξ > 0` on the sampled directions.
pub fn assumption5_diagnostic<R: Rng + ?Sized>(
    basis: &FeatureBasis,
    gamma: f64,
    mu_pairs: &[f64],
    samples: usize,
    rng: &mut R,
) -> f64 {
    let d = basis.dim();
    let mut best = f64::NEG_INFINITY;
    let mut theta = vec![0.0; d];
    for _ in 0..samples {
        for t in theta.iter_mut() {
            *t = rng.sample(StandardNormal);
        }
        let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        theta.iter_mut().for_each(|x| *x /= norm);
        let mut lhs = 0.0;
        for s in 0..basis.num_states() {
            let sq: Vec<f64> = (0..basis.num_actions(s)).map(|a| basis.value(s, a, &theta).powi(2)).collect();
            let max_sq = sq.iter().cloned().fold(0.0, f64::max);
            for (a, v) in sq.iter().enumerate() {
                let m = mu_pairs[basis.pair(s, a)];
                lhs += m * (gamma * gamma * max_sq - v);
            }
        }
        best = best.max(lhs);
    }
    best
}
