//! Sparse stochastic zeroth-order optimization for linear structured
//! prediction from bandit feedback.

pub mod cli;
pub mod data_io;
pub mod error;
pub mod estimators;
pub mod metrics;
pub mod objectives;
pub mod optimizer;
pub mod perturbation;
pub mod rng;
pub mod sparse;
pub mod stats;
pub mod structpred;
pub mod tasks;
pub mod theory;

pub use error::{Error, Result};
