//! Training dynamics of a one-layer softmax-attention transformer on a
//! word co-occurrence task.
//!
//! The crate generates the four-group dataset, computes the model and its
//! closed-form gradient flow, runs full-batch gradient descent while recording
//! the tracked dynamical quantities, and checks the trajectory for the
//! predicted two-phase behavior.

pub mod checks;
pub mod cli;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod gradients;
pub mod io;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
