//! Decoupled training for dense ReLU networks.
//!
//! A trained network carries two kinds of knowledge: which hidden neurons
//! fire for a given sample (its *activation pattern*, the structural part)
//! and the numeric weights (the quantitative part). Once the patterns are
//! frozen, the network is linear in its inputs along every active path, so
//! the weights can be re-trained on their own:
//!
//! - [`poc`] re-trains a copy of the network with hidden gates read from
//!   frozen patterns instead of the ReLU.
//! - [`paths`] expands the network into one independent weight per
//!   input-to-output or bias-to-output path ([`paths::LinearEstimator`]).
//! - [`estimator`] trains those path weights by SGD or by a direct
//!   least-squares solve, and merges estimators by weighted averaging for
//!   incremental and federated re-training.
//!
//! [`selector`] captures patterns and measures their stability during
//! training; [`persist`] reads and writes the `GLAI/1` text format.

pub mod cli;
pub mod data;
pub mod error;
pub mod estimator;
mod linalg;
pub mod matrix;
pub mod nn;
pub mod paths;
pub mod persist;
pub mod poc;
pub mod rng;
pub mod selector;

pub use data::Dataset;
pub use error::{Error, Result};
pub use estimator::{Loss, Trainer};
pub use matrix::Matrix;
pub use nn::{Network, NetworkSpec, TrainConfig};
pub use paths::{LinearEstimator, PathId, PathTable};
pub use selector::{ActivationPattern, PatternSet};
