//! Coherent local explanations of parametrized optimization solvers.
//!
//! A solver is probed around a present problem θ⁰, and linear/logistic
//! surrogates of its optimal value and decisions are fitted so that the
//! predicted objective matches the objective of the predicted decisions and
//! the predicted decisions are (nearly) feasible.

pub mod error;
pub mod experiments;
pub mod instances;
pub mod metrics;
pub mod problem;
pub mod sampling;
pub mod solvers;
pub mod surrogate;

pub use error::{ClemoError, Result};
