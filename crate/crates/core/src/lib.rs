//! Federated random survival forests for sites with partially overlapping
//! feature spaces.
//!
//! Estimators, trees, forests and federation are generic over [`Scalar`]
//! (`f32` or `f64`); the aliases below fix the double-precision variants
//! used by the experiment harness and the wire protocol.

pub mod dataset;
pub mod error;
pub mod federation;
pub mod forest;
pub mod scalar;
pub mod schema;
pub mod seeding;
pub mod survival;
pub mod table;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SurvivalOutcome = survival::Outcome<f64>;
pub type RiskTable = survival::RiskTable<f64>;
pub type StepFunction = survival::StepFunction<f64>;
pub type FeatureTable = table::Table<f64>;
pub type SurvivalTree = tree::SurvivalTree<f64>;
pub type Forest = forest::Forest<f64>;
pub type LocalModel = federation::LocalModel<f64>;
pub type FederatedPool = federation::FederatedPool<f64>;

pub type SurvivalOutcome32 = survival::Outcome<f32>;
pub type SurvivalTree32 = tree::SurvivalTree<f32>;
pub type Forest32 = forest::Forest<f32>;
