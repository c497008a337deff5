//! Training small feed-forward networks directly on non-decomposable
//! performance measures.
//!
//! The crate is organised bottom-up:
//!
//! - [`netcore`]: dense networks, weighted-reward backpropagation, SGD/ADAM
//!   steppers and a finite-difference gradient checker.
//! - [`rewards`]: reward surrogates, class-normalised rewards, confusion
//!   statistics and the running accumulators used by dual updates.
//! - [`measures`]: concave links (Min-TPR/TNR, Q-mean) with their dual steps,
//!   pseudolinear measures (F-beta) with valuation functions, and the nested
//!   concave decomposition of the negative KL divergence.
//! - [`optimizers`]: the primal-dual (DSPADE), nested primal-dual (DNEMSIS)
//!   and alternating maximisation (DAMP) trainers together with the
//!   cross-entropy, plug-in and structured-loss baselines.
//! - [`data`]: LIBSVM parsing, synthetic generators, splits, minibatch
//!   sampling, normalisation and prior-drift resampling.

pub mod data;
pub mod error;
pub mod measures;
pub mod netcore;
pub mod optimizers;
pub mod rewards;

pub use error::{Error, Result};
