//! Time-bounded task specifications for reinforcement learning.
//!
//! The crate parses Metric Interval Temporal Logic (MITL) formulas, compiles
//! the recurrence fragment into timed limit-deterministic generalized Büchi
//! automata, synchronizes those automata on-the-fly with stochastic grid-world
//! environments, and trains/evaluates tabular Q-learning policies on the
//! resulting product processes.

pub mod automata;
pub mod envs;
pub mod eval;
pub mod fragment;
pub mod learn;
pub mod mitl;
pub mod num;
pub mod product;

pub use num::Scalar;

/// Q-table over `f64` values, the type the CLI uses.
pub type QTable64 = learn::QTable<f64>;
/// Reward specification over `f64` values.
pub type RewardSpec64 = product::RewardSpec<f64>;
