//! Monotone submodular maximization under a knapsack constraint in nearly
//! linear time, plus the machinery to check the algorithm's analysis on small
//! instances against an exact optimum.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod generate;
pub mod guessing;
pub mod knapsack;
pub mod lazy_greedy;
pub mod multilinear;
pub mod oracle;
pub mod rounding;
pub mod verify;

pub use error::{Error, Result};
