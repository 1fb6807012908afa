//! Latent-conditioned TD3: an actor-critic learner that discovers diverse
//! solutions of a task by maximizing a variational lower bound of the
//! state-action mutual information `I(s, a; z)` with truncated importance
//! weights, together with TD3-based baselines, small environments with many
//! optimal policies, diversity metrics and a few-shot adaptation harness.

pub mod agent;
pub mod envs;
pub mod metrics;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod replay;

pub use error::{Error, Result};
