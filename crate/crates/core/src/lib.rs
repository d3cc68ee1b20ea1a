//! Task-graph mission modeling and flow-based multi-robot task allocation.

pub mod error;
pub mod graph;
pub mod mission;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64`-backed aliases for the common case.
pub type TaskGraph = mission::TaskGraph<f64>;
pub type RewardModel = mission::RewardModel<f64>;
pub type Mission = mission::Mission<f64>;
pub type ScalarFunction = mission::ScalarFunction<f64>;
pub type RewardVector = mission::RewardVector<f64>;
