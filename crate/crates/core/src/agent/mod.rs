//! The latent-conditioned TD3 learner and its baselines.
//!
//! [`Agent`] owns the networks and optimizers and exposes each update as a
//! separate operation. [`Trainer`] drives the environment loop and decides
//! which updates run on a given step.

pub mod baselines;
pub mod checkpoint;
mod config;
pub mod gradsuite;
pub mod importance;
mod latent;
mod learner;
pub mod losses;
pub mod nets;
mod trainer;

pub use baselines::{smerl_gate, unsupervised_reward};
pub use checkpoint::{encode_checkpoint, read_header, restore_checkpoint, CheckpointHeader};
pub use config::{BaselineMode, Ltd3Config};
pub use importance::{clip_weight, normalized_importance_weights, truncated_importance_weights};
pub use latent::{Latent, LatentSpec};
pub use learner::{Agent, Optimizers, UpdateCounts};
pub use nets::{AgentNets, LatentMlp, Posterior, PosteriorInput};
pub use trainer::{stream_rng, StepDiagnostics, Stream, Trainer};
