//! Combinatorial semi-bandits solved by Thompson sampling over a greedy
//! offline oracle.
//!
//! - [`model`]: instances, actions, outcome draws and semi-bandit feedback.
//! - [`rewards`]: probabilistic-coverage and linear expected rewards.
//! - [`oracle`]: greedy, exhaustive search, greedy-reachable solution sets.
//! - [`policies`]: CTS with Beta or Gaussian posteriors, CUCB baseline.
//! - [`analysis`]: marginal and action gaps, exploration prices, regret bounds.
//! - [`harness`]: replicated experiments, regret traces, CSV output.

// `!(a > b)` is used on purpose so that NaN lands on the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod instance_file;
pub mod model;
pub mod oracle;
pub mod policies;
pub mod rewards;

pub use error::{CmabError, Result};
pub use model::{Action, Feedback, Instance, MeanVector, OutcomeModel, Unit, UnitId};
pub use policies::PolicyKind;
pub use rewards::RewardFunction;
