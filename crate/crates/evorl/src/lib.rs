//! Deep-reinforcement-learning-controlled evolutionary algorithms.
//!
//! The crate provides three baseline evolutionary algorithms (0-1 knapsack,
//! maximum-weight TSP, and continuous function minimization), a
//! permutation-equivariant actor-critic network with its own reverse-mode
//! gradient tape, a PPO trainer with generalized advantage estimation, eleven
//! adaptation methods that let a trained policy control one stage of the
//! evolutionary loop, and an experiment harness with a CLI for instance
//! generation, baseline tuning, training, evaluation, and plot-data export.

pub mod adapt;
pub mod dist;
pub mod error;
pub mod evo;
pub mod harness;
pub mod net;
pub mod ppo;
pub mod problems;
pub mod rng;
pub mod special;
pub mod tape;

pub use error::{Error, Result};
