//! Algorithm selection for constrained continuous optimization from
//! constraint features.
//!
//! The crate covers problem instances and their evaluation ([`cop`]), a
//! portfolio of three constrained metaheuristics ([`solvers`]), constraint
//! features ([`features`]), a multi-objective instance evolver ([`evolver`]),
//! a small MLP performance predictor trained with Levenberg-Marquardt
//! ([`model`]), the experiment harness ([`harness`]) and configuration
//! ([`config`]).

pub mod config;
pub mod cop;
pub mod error;
pub mod evolver;
pub mod features;
pub mod harness;
pub mod model;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
