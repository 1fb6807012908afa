//! Mutual-information oracles and bounds, behaviour embeddings and the
//! diversity score.

mod diversity;
mod fit;
mod mi;

pub use diversity::{agent_embedding, behavior_embedding, diversity_score, gram_matrix, BehaviorEmbedding};
pub use fit::{fit_posterior, ring_dataset, LabeledData};
pub use mi::{mi_lower_bound, mi_oracle, ring_joint, JointDistribution, MiMode};
