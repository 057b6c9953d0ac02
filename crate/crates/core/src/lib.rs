//! Decentralized Q-learning for finite discounted stochastic games.
//!
//! The crate is organised bottom-up:
//!
//! - [`game`]: the game model, policies, validation, the 3×3 grid world and the text format.
//! - [`oracle`]: exact Bellman fixed points, best replies, stationary distributions,
//!   mixing times, linear projections and game constants.
//! - [`graph`]: strict best-reply graphs, equilibria and weak-acyclicity certificates.
//! - [`brpi`]: the best reply process with inertia and its step bound.
//! - [`learner`]: the tabular and linear decentralized learners.
//! - [`bounds`]: closed-form sample-complexity calculators.
//! - [`harness`]: seeded batch experiments, CSV output and the command line.

pub mod bounds;
pub mod brpi;
pub mod features;
pub mod game;
pub mod graph;
pub mod greedy;
pub mod harness;
pub mod learner;
pub mod oracle;
pub mod rng;

pub use game::{
    build_gridworld, BehaviorPolicy, DeterministicJointPolicy, GameError, PolicySpace,
    StochasticGame,
};
