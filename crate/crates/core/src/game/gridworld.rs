//! The 3×3 two-agent grid world.
//!
//! States are `"r,c"` with `r, c ∈ 1..=3`, ordered `1,1 < 1,2 < … < 3,3`. Agent 1 moves
//! the first coordinate (up = −1, down = +1), agent 2 the second (left = −1,
//! right = +1); both moves apply in the same step. Actions leaving the grid are not
//! offered. State `1,1` is terminal: it is absorbing and pays 0; every other state pays
//! −1 to both agents.

use super::StochasticGame;

pub const GRIDWORLD_DISCOUNT: f64 = 0.75;

const SIDE: i64 = 3;
const MOVES: [(&str, i64); 3] = [("up", -1), ("stay", 0), ("down", 1)];
const SLIDES: [(&str, i64); 3] = [("left", -1), ("stay", 0), ("right", 1)];

/// Grid world with both discounts equal to 0.75.
pub fn build_gridworld() -> StochasticGame {
    gridworld_with_discount(GRIDWORLD_DISCOUNT)
}

pub fn gridworld_with_discount(gamma: f64) -> StochasticGame {
    let cells: Vec<(i64, i64)> = (1..=SIDE).flat_map(|r| (1..=SIDE).map(move |c| (r, c))).collect();
    let states: Vec<String> = cells.iter().map(|(r, c)| format!("{r},{c}")).collect();
    let action_names: Vec<Vec<String>> = [MOVES, SLIDES]
        .iter()
        .map(|set| set.iter().map(|(n, _)| n.to_string()).collect())
        .collect();
    let inside = |x: i64| (1..=SIDE).contains(&x);
    let actions: Vec<Vec<Vec<usize>>> = vec![
        cells.iter().map(|&(r, _)| (0..3).filter(|&k| inside(r + MOVES[k].1)).collect()).collect(),
        cells.iter().map(|&(_, c)| (0..3).filter(|&k| inside(c + SLIDES[k].1)).collect()).collect(),
    ];
    let index = |r: i64, c: i64| ((r - 1) * SIDE + (c - 1)) as usize;
    let acts = actions.clone();
    StochasticGame::from_fn(states, action_names, actions, vec![gamma; 2], |s, joint| {
        let (r, c) = cells[s];
        let mut row = vec![0.0; cells.len()];
        if s == 0 {
            row[0] = 1.0;
            return (row, vec![0.0, 0.0]);
        }
        let dr = MOVES[acts[0][s][joint[0]]].1;
        let dc = SLIDES[acts[1][s][joint[1]]].1;
        row[index(r + dr, c + dc)] = 1.0;
        (row, vec![-1.0, -1.0])
    })
    .expect("grid world tables are well formed")
}
