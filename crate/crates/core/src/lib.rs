//! Stationary distributions of one-dimensional continuous-state Markov
//! chains by finite-state truncation, with LP-certified sup-norm error
//! bounds, and a single-server queue with abandonment as the worked model.

pub mod bounds;
pub mod config;
pub mod error;
pub mod kernel;
pub mod mcmc;
pub mod measure;
pub mod numerics;
pub mod queue;
pub mod stationary;

pub use error::{Error, Result};
