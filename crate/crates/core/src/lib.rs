//! Variable-importance estimators with exact oracles.
//!
//! The crate fits predictors, perturbs or refits them to score each input
//! feature, computes the population value of each index exactly on discrete
//! and linear-Gaussian models, and tests importance scores for significance.

pub mod data;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod inference;
pub mod linalg;
pub mod oracle;
pub mod predictors;
pub mod rng;
pub mod samplers;

pub use data::{Dataset, GaussianLinearSpec, Loss};
pub use error::{Result, VimError};
pub use estimators::{ImportanceReport, IndexTag, MethodId};
pub use predictors::{FittedPredictor, Predictor, PredictorSpec};
pub use samplers::{ConditionalSampler, PerturbationKind};
