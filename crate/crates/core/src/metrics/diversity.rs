//! Behaviour embeddings and the determinant diversity score.

use rand::Rng;

use crate::agent::{Agent, Latent};
use crate::envs::Env;
use crate::error::{Error, Result};

/// Mean action of a policy over the states it visits.
#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorEmbedding {
    pub mean_action: Vec<f64>,
    pub episodes: usize,
    pub label: String,
}

/// Rolls out `policy` for `n_episodes` full episodes and averages every
/// action taken.
pub fn behavior_embedding<P, R>(mut policy: P, env: &Env, n_episodes: usize, label: &str, rng: &mut R) -> Result<BehaviorEmbedding>
where
    P: FnMut(&[f64]) -> Result<Vec<f64>>,
    R: Rng + ?Sized,
{
    if n_episodes == 0 {
        return Err(Error::Input("behaviour embedding needs at least one episode".into()));
    }
    let dim = env.spec().action_dim;
    let mut sum = vec![0.0; dim];
    let mut steps = 0usize;
    for _ in 0..n_episodes {
        let mut state = env.reset(rng);
        loop {
            let a = policy(&state.observation)?;
            for (acc, x) in sum.iter_mut().zip(&a) {
                *acc += x;
            }
            steps += 1;
            let out = env.step(&state, &a)?;
            if out.done || out.state.terminated {
                break;
            }
            state = out.state;
        }
    }
    let mean_action: Vec<f64> = sum.iter().map(|x| x / steps as f64).collect();
    if mean_action.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite behaviour embedding".into()));
    }
    Ok(BehaviorEmbedding {
        mean_action,
        episodes: n_episodes,
        label: label.to_string(),
    })
}

/// Embedding of the agent's deterministic policy for latent `z`.
pub fn agent_embedding<R: Rng + ?Sized>(agent: &Agent, z: &Latent, env: &Env, n_episodes: usize, rng: &mut R) -> Result<BehaviorEmbedding> {
    behavior_embedding(|s| agent.policy(s, z), env, n_episodes, &format!("{z:?}"), rng)
}

/// Squared-exponential Gram matrix of the embeddings.
pub fn gram_matrix(embeddings: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let m = embeddings.len();
    let mut k = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let d2: f64 = embeddings[i]
                .iter()
                .zip(&embeddings[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            k[i][j] = (-d2 / (2.0 * h * h)).exp();
        }
    }
    k
}

/// Determinant of the Gram matrix via Cholesky. The diagonal is 1, so a
/// pivot below `M * f64::EPSILON` means the matrix is singular to working
/// precision and the score is 0.
pub fn diversity_score(embeddings: &[Vec<f64>], h: f64) -> Result<f64> {
    if embeddings.is_empty() || !(h > 0.0) {
        return Err(Error::Input("diversity needs at least one embedding and h > 0".into()));
    }
    let k = gram_matrix(embeddings, h);
    let m = k.len();
    let mut l = vec![vec![0.0; m]; m];
    let mut det = 1.0;
    let floor = m as f64 * f64::EPSILON;
    for j in 0..m {
        let mut d = k[j][j];
        for p in 0..j {
            d -= l[j][p] * l[j][p];
        }
        if d <= floor {
            return Ok(0.0);
        }
        let ljj = d.sqrt();
        l[j][j] = ljj;
        det *= d;
        for i in j + 1..m {
            let mut s = k[i][j];
            for p in 0..j {
                s -= l[i][p] * l[j][p];
            }
            l[i][j] = s / ljj;
        }
    }
    Ok(det.clamp(0.0, 1.0))
}
