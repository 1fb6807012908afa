//! The interaction loop: one environment step plus the scheduled updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::baselines::{smerl_gate, unsupervised_reward};
use super::config::BaselineMode;
use super::latent::Latent;
use super::learner::Agent;
use crate::envs::{Env, EnvState};
use crate::error::{Error, Result};
use crate::replay::{ReplayBuffer, Transition, TransitionDims};

/// Independent random streams derived from one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Env = 2,
    Latent = 3,
    Explore = 4,
    Batch = 5,
    InfoBatch = 6,
    TargetNoise = 7,
    Eval = 8,
    FewShot = 9,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Clone, Debug)]
struct TrainRngs {
    env: ChaCha8Rng,
    latent: ChaCha8Rng,
    explore: ChaCha8Rng,
    batch: ChaCha8Rng,
    info_batch: ChaCha8Rng,
    target_noise: ChaCha8Rng,
}

impl TrainRngs {
    fn new(seed: u64) -> Self {
        Self {
            env: stream_rng(seed, Stream::Env),
            latent: stream_rng(seed, Stream::Latent),
            explore: stream_rng(seed, Stream::Explore),
            batch: stream_rng(seed, Stream::Batch),
            info_batch: stream_rng(seed, Stream::InfoBatch),
            target_noise: stream_rng(seed, Stream::TargetNoise),
        }
    }
}

/// What happened during one call to [`Trainer::train_step`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub t: u64,
    pub reward: f64,
    pub intrinsic: f64,
    pub critic_loss: Option<f64>,
    pub j_q: Option<f64>,
    pub j_info: Option<f64>,
    pub posterior_ll: Option<f64>,
    /// Task return of the episode that ended on this step.
    pub episode_return: Option<f64>,
    /// Gate decision for the episode that ended on this step (gated mode).
    pub gated_in: Option<bool>,
}

/// Owns the agent, environment, replay buffer and the episode in progress.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub agent: Agent,
    env: Env,
    pub buffer: ReplayBuffer,
    rngs: TrainRngs,
    state: EnvState,
    z: Latent,
    t: u64,
    episode_return: f64,
    pending: Vec<(Transition, f64)>,
    r_star: Option<f64>,
}

impl Trainer {
    /// `r_star` is required in gated mode and ignored otherwise.
    pub fn new(agent: Agent, env: Env, seed: u64, r_star: Option<f64>) -> Result<Self> {
        if agent.mode() == BaselineMode::SmerlGate && r_star.is_none() {
            return Err(Error::Config("smerl_gate needs a reference return r_star".into()));
        }
        let spec = env.spec();
        let latent = agent.latent_spec();
        let dims = TransitionDims {
            state: spec.state_dim,
            action: spec.action_dim,
            latent_cont: latent.cont_dim,
            latent_disc: latent.disc_k,
        };
        let buffer = ReplayBuffer::new(agent.config().buffer_capacity, dims)?;
        let mut rngs = TrainRngs::new(seed);
        let state = env.reset(&mut rngs.env);
        let z = latent.sample(&mut rngs.latent);
        Ok(Self {
            agent,
            env,
            buffer,
            rngs,
            state,
            z,
            t: 0,
            episode_return: 0.0,
            pending: Vec::new(),
            r_star,
        })
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn steps_done(&self) -> u64 {
        self.t
    }

    pub fn current_latent(&self) -> &Latent {
        &self.z
    }

    fn random_action(&mut self) -> Vec<f64> {
        let spec = self.env.spec();
        spec.action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(lo, hi)| self.rngs.explore.random_range(*lo..=*hi))
            .collect()
    }

    pub fn train_step(&mut self) -> Result<StepDiagnostics> {
        let t = self.t;
        let cfg = self.agent.config().clone();
        let mode = cfg.baseline_mode;
        let s = self.state.observation.clone();
        let a = if t < cfg.warmup_steps {
            self.random_action()
        } else {
            self.agent.act(&s, &self.z, cfg.explore_sigma, &mut self.rngs.explore)?
        };
        let outcome = self.env.step(&self.state, &a)?;
        let intrinsic = if mode.uses_intrinsic_reward() {
            unsupervised_reward(mode, self.agent.log_q(&s, &a, &self.z)?, cfg.beta_intrinsic)
        } else {
            0.0
        };
        self.episode_return += outcome.reward;
        let transition = Transition {
            s,
            a,
            s_next: outcome.state.observation.clone(),
            r: outcome.reward,
            done: outcome.done,
            z: self.z.clone(),
        };
        if mode == BaselineMode::SmerlGate {
            self.pending.push((transition, intrinsic));
        } else {
            self.buffer.push(Transition {
                r: transition.r + intrinsic,
                ..transition
            })?;
        }

        let mut diag = StepDiagnostics {
            t,
            reward: outcome.reward,
            intrinsic,
            ..StepDiagnostics::default()
        };
        if t >= cfg.warmup_steps && !self.buffer.is_empty() {
            let batch = self.buffer.sample_uniform(cfg.batch, &mut self.rngs.batch)?;
            let y = self.agent.compute_target(&batch, &mut self.rngs.target_noise)?;
            let (l1, l2) = self.agent.critic_update(&batch, &y)?;
            diag.critic_loss = Some(0.5 * (l1 + l2));
            if mode.uses_intrinsic_reward() {
                diag.posterior_ll = Some(self.agent.posterior_update(&batch)?);
            }
            if t % cfg.d_atr == 0 {
                diag.j_q = Some(self.agent.actor_q_update(&batch)?);
            }
            if mode == BaselineMode::Ltd3 && t % cfg.d_info == 0 {
                let info_batch = self.buffer.sample_uniform(cfg.batch, &mut self.rngs.info_batch)?;
                diag.j_info = Some(self.agent.info_update(&info_batch)?);
            }
        }

        if outcome.done || outcome.state.terminated {
            diag.episode_return = Some(self.episode_return);
            if mode == BaselineMode::SmerlGate {
                let r_star = self.r_star.expect("checked at construction");
                let gate = smerl_gate(self.episode_return, r_star, cfg.eps_smerl);
                diag.gated_in = Some(gate > 0.0);
                for (tr, intrinsic) in self.pending.drain(..) {
                    self.buffer.push(Transition {
                        r: tr.r + gate * intrinsic,
                        ..tr
                    })?;
                }
            }
            self.episode_return = 0.0;
            self.state = self.env.reset(&mut self.rngs.env);
            self.z = self.agent.latent_spec().sample(&mut self.rngs.latent);
        } else {
            self.state = outcome.state;
        }
        self.t += 1;
        Ok(diag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{LatentSpec, Ltd3Config};
    use crate::envs::{PointVel, PointVelConfig};

    fn trainer(mode: BaselineMode, alpha: f64, seed: u64) -> Trainer {
        let env = Env::PointVel(
            PointVel::new(PointVelConfig {
                horizon: 50,
                ..PointVelConfig::default()
            })
            .unwrap(),
        );
        let cfg = Ltd3Config {
            hidden_sizes: vec![8, 8],
            latent_embed_dim: 4,
            batch: 8,
            warmup_steps: 20,
            baseline_mode: mode,
            alpha_info: alpha,
            buffer_capacity: 10_000,
            ..Ltd3Config::default()
        };
        let mut init = stream_rng(seed, Stream::Init);
        let agent = Agent::new(cfg, env.spec().clone(), LatentSpec::new(2, 0).unwrap(), &mut init).unwrap();
        Trainer::new(agent, env, seed, Some(40.0)).unwrap()
    }

    #[test]
    fn update_schedule_counts() {
        let mut tr = trainer(BaselineMode::Ltd3, 1.0, 0);
        for _ in 0..120 {
            tr.train_step().unwrap();
        }
        let c = tr.agent.counts;
        assert_eq!((c.critic, c.actor_q, c.info), (100, 50, 25));
    }

    #[test]
    fn zero_alpha_matches_plain_td3() {
        let mut a = trainer(BaselineMode::Ltd3, 0.0, 3);
        let mut b = trainer(BaselineMode::Td3, 1.0, 3);
        for _ in 0..150 {
            let da = a.train_step().unwrap();
            let db = b.train_step().unwrap();
            assert_eq!(da.critic_loss, db.critic_loss);
            assert_eq!(a.agent.nets.actor, b.agent.nets.actor);
            assert_eq!(a.agent.nets.critic1, b.agent.nets.critic1);
            assert_eq!(a.agent.nets.critic2_target, b.agent.nets.critic2_target);
        }
        assert!(a.agent.counts.info > 0);
    }

    #[test]
    fn equal_seeds_are_bit_identical() {
        let mut a = trainer(BaselineMode::Ltd3, 1.0, 9);
        let mut b = trainer(BaselineMode::Ltd3, 1.0, 9);
        for _ in 0..150 {
            assert_eq!(a.train_step().unwrap(), b.train_step().unwrap());
        }
        assert_eq!(a.agent, b.agent);
    }

    #[test]
    fn latent_fixed_within_episode() {
        let mut tr = trainer(BaselineMode::Td3, 1.0, 1);
        let z0 = tr.current_latent().clone();
        for _ in 0..49 {
            tr.train_step().unwrap();
            assert_eq!(tr.current_latent(), &z0);
        }
        let d = tr.train_step().unwrap();
        assert!(d.episode_return.is_some());
        assert_ne!(tr.current_latent(), &z0);
    }

    #[test]
    fn gated_mode_holds_episode_until_end() {
        let mut tr = trainer(BaselineMode::SmerlGate, 1.0, 2);
        let mut rewards = Vec::new();
        for _ in 0..49 {
            rewards.push(tr.train_step().unwrap().reward);
        }
        assert!(tr.buffer.is_empty());
        let d = tr.train_step().unwrap();
        rewards.push(d.reward);
        assert_eq!(d.gated_in, Some(false));
        assert_eq!(tr.buffer.len(), 50);
        // A rejected episode keeps only its task reward.
        for (i, r) in rewards.iter().enumerate() {
            assert_eq!(tr.buffer.get(i).unwrap().r, *r);
        }
    }

    #[test]
    fn diayn_adds_intrinsic_reward() {
        let mut tr = trainer(BaselineMode::Td3DiaynSa, 1.0, 4);
        let d = tr.train_step().unwrap();
        let stored = tr.buffer.get(0).unwrap();
        assert!((stored.r - (d.reward + d.intrinsic)).abs() < 1e-15);
        assert!(d.intrinsic != 0.0);
    }

    #[test]
    fn smerl_requires_reference_return() {
        let tr = trainer(BaselineMode::Td3, 1.0, 0);
        let mut agent = tr.agent.clone();
        let cfg = Ltd3Config {
            baseline_mode: BaselineMode::SmerlGate,
            ..agent.config().clone()
        };
        let mut init = stream_rng(0, Stream::Init);
        agent = Agent::new(cfg, tr.env().spec().clone(), agent.latent_spec(), &mut init).unwrap();
        assert!(Trainer::new(agent, tr.env().clone(), 0, None).is_err());
    }
}
