//! Stationary distribution and mixing time of the behavior-policy chain.

use crate::game::{BehaviorPolicy, StochasticGame};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("behavior chain is reducible (irreducibility assumption fails)")]
    Reducible,
    #[error("behavior chain is periodic with period {0} (aperiodicity assumption fails)")]
    Periodic(usize),
    #[error("stationary solve residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error("alpha must lie in (0,1), got {0}")]
    BadAlpha(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainAnalysis {
    pub mu_states: Vec<f64>,
    /// Per agent, `μ^i(s, a^i)` in (state, position) order.
    pub mu_state_action: Vec<Vec<f64>>,
    pub mu_min: f64,
    /// `(α, t_mix(α))` for each requested α.
    pub t_mix: Vec<(f64, usize)>,
}

/// State transition matrix under the behavior policy (row-stochastic).
pub fn behavior_state_chain(game: &StochasticGame, bp: &BehaviorPolicy) -> DMatrix<f64> {
    let n = game.num_states();
    let mut p = DMatrix::zeros(n, n);
    for s in 0..n {
        for ja in 0..game.joint_count(s) {
            let w = joint_prob(game, bp, s, ja, None);
            for (t, &q) in game.row(s, ja).iter().enumerate() {
                p[(s, t)] += w * q;
            }
        }
    }
    p
}

/// Probability of joint action `ja` at `s`, optionally excluding one agent's factor.
fn joint_prob(game: &StochasticGame, bp: &BehaviorPolicy, s: usize, ja: usize, skip: Option<usize>) -> f64 {
    game.decode_joint(s, ja)
        .iter()
        .enumerate()
        .filter(|&(j, _)| Some(j) != skip)
        .map(|(j, &a)| bp.prob(j, s, a, game.num_actions(j, s)))
        .product()
}

fn check_ergodic(p: &DMatrix<f64>) -> Result<(), ChainError> {
    let adj: Vec<Vec<usize>> =
        (0..p.nrows()).map(|s| (0..p.ncols()).filter(|&t| p[(s, t)] > 0.0).collect()).collect();
    let closed = crate::game::validate::closed_classes(&adj);
    if closed.len() != 1 || closed[0].len() != p.nrows() {
        return Err(ChainError::Reducible);
    }
    match crate::game::validate::period(&adj, &closed[0]) {
        1 => Ok(()),
        d => Err(ChainError::Periodic(d)),
    }
}

/// Solve `μᵀP = μᵀ, Σμ = 1` directly.
fn solve_stationary(p: &DMatrix<f64>) -> Result<Vec<f64>, ChainError> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let mu = a.lu().solve(&b).ok_or(ChainError::Reducible)?;
    let residual = (p.transpose() * &mu - &mu).amax().max((mu.sum() - 1.0).abs());
    if residual > RESIDUAL_TOL {
        return Err(ChainError::Residual(residual));
    }
    Ok(mu.iter().copied().collect())
}

/// Stationary distribution by repeated multiplication (a cross-check for the direct solve).
pub fn stationary_by_power(p: &DMatrix<f64>, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = p.nrows();
    let mut mu = DVector::from_element(n, 1.0 / n as f64);
    let pt = p.transpose();
    for _ in 0..max_iter {
        let next = &pt * &mu;
        let diff = (&next - &mu).amax();
        mu = next;
        if diff <= tol {
            break;
        }
    }
    let z = mu.sum();
    mu.iter().map(|x| x / z).collect()
}

/// Stationary distributions over states and per-agent (state, action) pairs.
pub fn stationary_distribution(game: &StochasticGame, bp: &BehaviorPolicy) -> Result<ChainAnalysis, ChainError> {
    let p = behavior_state_chain(game, bp);
    check_ergodic(&p)?;
    let mu = solve_stationary(&p)?;
    let mu_state_action: Vec<Vec<f64>> = (0..game.num_agents())
        .map(|i| {
            (0..game.num_states())
                .flat_map(|s| bp.distribution(game, i, s).into_iter().map(move |q| (s, q)))
                .map(|(s, q)| mu[s] * q)
                .collect()
        })
        .collect();
    let mu_min = mu_state_action.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    Ok(ChainAnalysis { mu_states: mu, mu_state_action, mu_min, t_mix: Vec::new() })
}

/// Transition matrix of agent `i`'s (s, a^i) chain.
fn pair_chain(game: &StochasticGame, bp: &BehaviorPolicy, i: usize) -> DMatrix<f64> {
    let ns = game.num_states();
    let offsets: Vec<usize> = (0..=ns).scan(0, |acc, s| {
        let o = *acc;
        if s < ns {
            *acc += game.num_actions(i, s);
        }
        Some(o)
    })
    .collect();
    let m = offsets[ns];
    let own: Vec<Vec<f64>> = (0..ns).map(|s| bp.distribution(game, i, s)).collect();
    let mut out = DMatrix::zeros(m, m);
    for s in 0..ns {
        for ja in 0..game.joint_count(s) {
            let a = game.decode_joint(s, ja)[i];
            let w = joint_prob(game, bp, s, ja, Some(i));
            for (t, &q) in game.row(s, ja).iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                for (b, &pb) in own[t].iter().enumerate() {
                    out[(offsets[s] + a, offsets[t] + b)] += w * q * pb;
                }
            }
        }
    }
    out
}

fn worst_tv(pt: &DMatrix<f64>, mu: &[f64]) -> f64 {
    (0..pt.nrows())
        .map(|x| 0.5 * (0..pt.ncols()).map(|y| (pt[(x, y)] - mu[y]).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Agent-`i` mixing time: smallest `t ≥ 1` with `max_x TV(P^t(x,·), μ^i) ≤ α`.
///
/// Powers `P, P², P⁴, …` are formed until the distance drops below `α`, then `t` is
/// located by bisection, composing each candidate power from the stored squares.
pub fn mixing_time_agent(game: &StochasticGame, bp: &BehaviorPolicy, i: usize, alpha: f64) -> Result<usize, ChainError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ChainError::BadAlpha(alpha));
    }
    let analysis = stationary_distribution(game, bp)?;
    let mu = &analysis.mu_state_action[i];
    let p = pair_chain(game, bp, i);
    let mut squares = vec![p.clone()];
    if worst_tv(&p, mu) <= alpha {
        return Ok(1);
    }
    // Invariant: d(2^k) > α for the last stored square.
    loop {
        let last = squares.last().unwrap();
        let next = last * last;
        let done = worst_tv(&next, mu) <= alpha;
        squares.push(next);
        if done {
            break;
        }
        if squares.len() > 62 {
            return Err(ChainError::Reducible);
        }
    }
    let k = squares.len() - 1;
    let power = |t: usize| -> DMatrix<f64> {
        let mut acc: Option<DMatrix<f64>> = None;
        for (bit, sq) in squares.iter().enumerate() {
            if t >> bit & 1 == 1 {
                acc = Some(match acc {
                    None => sq.clone(),
                    Some(a) => a * sq,
                });
            }
        }
        acc.expect("t ≥ 1")
    };
    let (mut lo, mut hi) = (1usize << (k - 1), 1usize << k);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if worst_tv(&power(mid), mu) <= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `t_mix(α) = max_i t^i_mix(α)`.
pub fn mixing_time(game: &StochasticGame, bp: &BehaviorPolicy, alpha: f64) -> Result<usize, ChainError> {
    (0..game.num_agents()).map(|i| mixing_time_agent(game, bp, i, alpha)).try_fold(0, |m, t| Ok(m.max(t?)))
}

/// Stationary quantities plus mixing times at each α.
pub fn analyze_chain(game: &StochasticGame, bp: &BehaviorPolicy, alphas: &[f64]) -> Result<ChainAnalysis, ChainError> {
    let mut out = stationary_distribution(game, bp)?;
    out.t_mix = alphas.iter().map(|&a| Ok((a, mixing_time(game, bp, a)?))).collect::<Result<_, ChainError>>()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_gridworld, testing::random_game, DeterministicJointPolicy, PolicySpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_bp(game: &StochasticGame) -> BehaviorPolicy {
        let base = DeterministicJointPolicy::new(game, vec![vec![0; game.num_states()]; game.num_agents()]).unwrap();
        BehaviorPolicy::new(base, vec![0.5; game.num_agents()])
    }

    #[test]
    fn symmetric_two_state_chain() {
        let g = StochasticGame::from_fn(
            vec!["x".into(), "y".into()],
            vec![vec!["a".into(), "b".into()]],
            vec![vec![vec![0, 1], vec![0, 1]]],
            vec![0.5],
            |s, j| {
                let stay = if j[0] == 0 { 0.8 } else { 0.2 };
                (if s == 0 { vec![stay, 1.0 - stay] } else { vec![1.0 - stay, stay] }, vec![0.0])
            },
        )
        .unwrap();
        let c = stationary_distribution(&g, &uniform_bp(&g)).unwrap();
        assert!((c.mu_states[0] - 0.5).abs() < 1e-12);
        assert!((c.mu_state_action[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_kernel_mixes_in_one_step() {
        let g = StochasticGame::from_fn(
            vec!["x".into(), "y".into(), "z".into()],
            vec![vec!["a".into()]],
            vec![vec![vec![0]; 3]],
            vec![0.5],
            |_, _| (vec![0.2, 0.3, 0.5], vec![0.0]),
        )
        .unwrap();
        for alpha in [0.01, 0.25, 0.9] {
            assert_eq!(mixing_time(&g, &uniform_bp(&g), alpha).unwrap(), 1);
        }
    }

    #[test]
    fn gridworld_chain_is_reducible() {
        let g = build_gridworld();
        let err = stationary_distribution(&g, &uniform_bp(&g)).unwrap_err();
        assert_eq!(err, ChainError::Reducible);
    }

    #[test]
    fn power_iteration_agrees_with_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let g = random_game(&mut rng, 2, 4, 3);
            let bp = BehaviorPolicy::new(PolicySpace::new(&g).sample(&mut rng), vec![0.3, 0.7]);
            let direct = stationary_distribution(&g, &bp).unwrap();
            let p = behavior_state_chain(&g, &bp);
            let power = stationary_by_power(&p, 1e-15, 100_000);
            for (a, b) in direct.mu_states.iter().zip(&power) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    /// Brute-force check of the bisection: scan t = 1, 2, … with plain matrix powers.
    #[test]
    fn mixing_time_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let g = random_game(&mut rng, 2, 3, 2);
            let bp = BehaviorPolicy::new(PolicySpace::new(&g).sample(&mut rng), vec![0.2, 0.2]);
            let mu = stationary_distribution(&g, &bp).unwrap().mu_state_action[0].clone();
            let p = pair_chain(&g, &bp, 0);
            for alpha in [0.25, 0.01, 1e-6] {
                let mut pt = p.clone();
                let mut t = 1;
                while worst_tv(&pt, &mu) > alpha {
                    pt = &pt * &p;
                    t += 1;
                }
                assert_eq!(mixing_time_agent(&g, &bp, 0, alpha).unwrap(), t);
            }
            assert!(mixing_time(&g, &bp, 0.5).unwrap() <= mixing_time(&g, &bp, 0.25).unwrap());
        }
    }
}
