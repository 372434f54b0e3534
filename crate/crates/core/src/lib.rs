//! POMDP parameter estimation with fuzzy expert priors.
//!
//! The crate provides a standard EM learner for action-conditioned POMDPs
//! with Gaussian observation models, the Fuzzy-MAP variant whose M-step
//! adds pseudo-counts derived from a Takagi-Sugeno fuzzy model, synthetic
//! ground-truth environments, evaluation metrics, and experiment pipelines.

pub mod assets;
pub mod em;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fuzzy;
pub mod fuzzy_map;
pub mod pomdp;
pub mod seeding;

pub use error::{Error, Result};
