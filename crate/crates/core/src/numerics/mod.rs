//! Dense math, MLPs with manual backpropagation, Adam, log-densities and a
//! finite-difference gradient checker.

pub mod adam;
pub mod dist;
pub mod gradcheck;
pub mod matrix;
pub mod mlp;

pub use adam::AdamState;
pub use dist::{categorical_log_prob, gaussian_log_prob, logsumexp, softmax, LOG_STD_MAX, LOG_STD_MIN};
pub use gradcheck::{check_gradients, BlockReport, GradCheckConfig, GradCheckReport};
pub use matrix::Matrix;
pub use mlp::{Mlp, MlpTape, OutputHead};
