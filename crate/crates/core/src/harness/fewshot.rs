//! Few-shot adaptation: spend a budget of test episodes choosing a latent,
//! then score the chosen one.

use rand::Rng;

use super::run::{episode_return, mean_std};
use crate::agent::{Agent, Latent};
use crate::envs::Env;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FewShotConfig {
    /// Candidate episodes on the test environment before selection.
    pub budget: usize,
    pub final_episodes: usize,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        Self {
            budget: 8,
            final_episodes: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FewShotReport {
    pub candidates: Vec<(Latent, f64)>,
    pub best_index: usize,
    pub best_z: Latent,
    pub final_returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Episodes run on the test environment, counted as they start.
    pub test_episodes: usize,
    /// `episode,phase,candidate,return` lines, one per test episode.
    pub log: Vec<String>,
}

/// Candidate latents: discrete classes are enumerated in order (repeating
/// once all are covered); continuous parts are drawn from the prior.
pub fn candidate_latents<R: Rng + ?Sized>(agent: &Agent, budget: usize, rng: &mut R) -> Result<Vec<Latent>> {
    let spec = agent.latent_spec();
    if budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    if spec.disc_k > 0 && budget < spec.disc_k {
        return Err(Error::Config(format!(
            "budget {budget} cannot cover {} discrete latent classes",
            spec.disc_k
        )));
    }
    Ok((0..budget)
        .map(|i| {
            let mut z = spec.sample(rng);
            if spec.disc_k > 0 {
                z.disc = Some(i % spec.disc_k);
            }
            z
        })
        .collect())
}

pub fn fewshot_adapt<R: Rng + ?Sized>(agent: &Agent, fs: &FewShotConfig, test_env: &Env, rng: &mut R) -> Result<FewShotReport> {
    if fs.final_episodes == 0 {
        return Err(Error::Config("final_episodes must be at least 1".into()));
    }
    let candidates = candidate_latents(agent, fs.budget, rng)?;
    let mut episodes = 0usize;
    let mut log = Vec::with_capacity(fs.budget + fs.final_episodes);
    let mut scored = Vec::with_capacity(candidates.len());
    let mut best_index = 0;
    let mut best_ret = f64::NEG_INFINITY;
    for (i, z) in candidates.into_iter().enumerate() {
        episodes += 1;
        let ret = episode_return(agent, &z, test_env, rng)?;
        log.push(format!("{episodes},select,{i},{ret}"));
        if ret > best_ret {
            best_ret = ret;
            best_index = i;
        }
        scored.push((z, ret));
    }
    let best_z = scored[best_index].0.clone();
    let mut final_returns = Vec::with_capacity(fs.final_episodes);
    for _ in 0..fs.final_episodes {
        episodes += 1;
        let ret = episode_return(agent, &best_z, test_env, rng)?;
        log.push(format!("{episodes},final,{best_index},{ret}"));
        final_returns.push(ret);
    }
    let (mean, std) = mean_std(&final_returns);
    Ok(FewShotReport {
        candidates: scored,
        best_index,
        best_z,
        final_returns,
        mean,
        std,
        test_episodes: episodes,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{stream_rng, LatentSpec, Ltd3Config, Stream};
    use crate::envs::{PointVel, PointVelConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent(latent: LatentSpec) -> (Agent, Env) {
        let env = Env::PointVel(PointVel::new(PointVelConfig { horizon: 20, ..PointVelConfig::default() }).unwrap());
        let cfg = Ltd3Config {
            hidden_sizes: vec![8],
            ..Ltd3Config::default()
        };
        let a = Agent::new(cfg, env.spec().clone(), latent, &mut stream_rng(0, Stream::Init)).unwrap();
        (a, env)
    }

    #[test]
    fn single_candidate_is_selected() {
        let (a, env) = agent(LatentSpec::new(2, 0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fs = FewShotConfig { budget: 1, final_episodes: 5 };
        let r = fewshot_adapt(&a, &fs, &env, &mut rng).unwrap();
        assert_eq!(r.best_index, 0);
        assert_eq!(r.best_z, r.candidates[0].0);
        assert_eq!(r.test_episodes, 6);
        assert_eq!(r.log.len(), 6);
    }

    #[test]
    fn budget_is_exact_and_best_is_first_maximum() {
        let (a, env) = agent(LatentSpec::new(1, 3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fs = FewShotConfig { budget: 7, final_episodes: 5 };
        let r = fewshot_adapt(&a, &fs, &env, &mut rng).unwrap();
        assert_eq!(r.test_episodes, 12);
        let classes: Vec<usize> = r.candidates.iter().map(|(z, _)| z.disc.unwrap()).collect();
        assert_eq!(classes, vec![0, 1, 2, 0, 1, 2, 0]);
        let max = r.candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let first = r.candidates.iter().position(|c| c.1 == max).unwrap();
        assert_eq!(r.best_index, first);
    }

    #[test]
    fn discrete_budget_underflow_is_config_error() {
        let (a, env) = agent(LatentSpec::new(0, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fs = FewShotConfig { budget: 3, final_episodes: 5 };
        assert!(matches!(fewshot_adapt(&a, &fs, &env, &mut rng), Err(Error::Config(_))));
    }
}
