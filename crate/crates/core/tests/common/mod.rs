//! Random small games shared by the integration tests.
#![allow(dead_code)]

use decq::StochasticGame;
use rand::Rng;

/// Random game with per-state action counts in `1..=max_actions`. With `sparse`, each
/// kernel row keeps a random nonempty subset of its support.
pub fn random_game<R: Rng>(
    rng: &mut R,
    agents: usize,
    states: usize,
    max_actions: usize,
    sparse: bool,
    discounts: (f64, f64),
) -> StochasticGame {
    let names: Vec<String> = (0..states).map(|s| format!("s{s}")).collect();
    let action_names: Vec<Vec<String>> = (0..agents).map(|_| (0..max_actions).map(|a| format!("a{a}")).collect()).collect();
    let actions: Vec<Vec<Vec<usize>>> = (0..agents)
        .map(|_| (0..states).map(|_| (0..rng.gen_range(1..=max_actions)).collect()).collect())
        .collect();
    let gammas: Vec<f64> = (0..agents).map(|_| discounts.0 + rng.gen::<f64>() * (discounts.1 - discounts.0)).collect();
    StochasticGame::from_fn(names, action_names, actions, gammas, |_, _| {
        let mut row: Vec<f64> = (0..states)
            .map(|_| if sparse && rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.05..1.0) })
            .collect();
        if row.iter().all(|&p| p == 0.0) {
            row[rng.gen_range(0..states)] = 1.0;
        }
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= z);
        // Make the row sum to one exactly.
        let last = row.iter().rposition(|&p| p > 0.0).unwrap();
        let rest: f64 = row.iter().enumerate().filter(|&(k, _)| k != last).map(|(_, p)| p).sum();
        row[last] = 1.0 - rest;
        (row, (0..agents).map(|_| rng.gen_range(0.0..1.0)).collect())
    })
    .unwrap()
}

/// One-state game with the given action counts and payoff function of the joint action.
pub fn matrix_game(counts: &[usize], gamma: f64, payoff: impl Fn(&[usize]) -> Vec<f64>) -> StochasticGame {
    let n = counts.len();
    let action_names = counts.iter().map(|&c| (0..c).map(|a| format!("a{a}")).collect()).collect();
    let actions = counts.iter().map(|&c| vec![(0..c).collect()]).collect();
    StochasticGame::from_fn(vec!["only".into()], action_names, actions, vec![gamma; n], |_, joint| {
        (vec![1.0], payoff(joint))
    })
    .unwrap()
}
