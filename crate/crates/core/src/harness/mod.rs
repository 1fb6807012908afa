//! Orchestration: configuration files, training runs with evaluation and
//! checkpoints, few-shot adaptation and sweeps.

mod config;
mod fewshot;
mod run;
mod sweep;

pub use config::{EnvKind, RunConfig, VariantKind, KEY_HELP};
pub use fewshot::{candidate_latents, fewshot_adapt, FewShotConfig, FewShotReport};
pub use run::{
    episode_return, evaluate, load_checkpoint, mean_std, train_run, EvalStats, LoadedCheckpoint, MetricsRow, Run, RunSummary,
    METRICS_HEADER,
};
pub use sweep::{aggregate, expand_axes, sweep, RunOutcome, SweepEntry, SweepReport, AGGREGATE_HEADER};
