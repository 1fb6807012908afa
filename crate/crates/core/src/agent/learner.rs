//! The learner: networks, optimizers and the individual update steps.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{BaselineMode, Ltd3Config};
use super::importance::truncated_importance_weights;
use super::latent::{Latent, LatentSpec};
use super::losses::{actor_q_objective, critic_loss, info_objective, posterior_log_likelihood};
use super::nets::{AgentNets, LatentMlp, Posterior, PosteriorInput};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::numerics::{AdamState, Matrix, OutputHead};
use crate::replay::Batch;

/// One Adam state per trained parameter group. The actor keeps separate
/// moments for the return and information objectives.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizers {
    pub actor_q: AdamState,
    pub actor_info: AdamState,
    pub critic1: AdamState,
    pub critic2: AdamState,
    pub posterior: AdamState,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateCounts {
    pub critic: u64,
    pub actor_q: u64,
    pub info: u64,
    pub posterior: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    config: Ltd3Config,
    env_spec: EnvSpec,
    latent: LatentSpec,
    pub nets: AgentNets,
    pub optim: Optimizers,
    pub counts: UpdateCounts,
}

fn action_half_range(spec: &EnvSpec) -> Vec<f64> {
    spec.action_range().iter().map(|r| 0.5 * r).collect()
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(config: Ltd3Config, env_spec: EnvSpec, latent: LatentSpec, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (sd, ad, ld) = (env_spec.state_dim, env_spec.action_dim, latent.input_dim());
        let h = &config.hidden_sizes;
        let e = config.latent_embed_dim;
        let head = OutputHead::action_box(&env_spec.action_low, &env_spec.action_high);
        let actor = LatentMlp::new(sd, 0, ld, e, h, ad, head, rng)?;
        let critic1 = LatentMlp::new(sd, ad, ld, e, h, 1, OutputHead::Linear, rng)?;
        let critic2 = LatentMlp::new(sd, ad, ld, e, h, 1, OutputHead::Linear, rng)?;
        let input = if config.baseline_mode.posterior_sees_action() {
            PosteriorInput::StateAction
        } else {
            PosteriorInput::State
        };
        let posterior = Posterior::new(latent, input, sd, ad, h, rng)?;
        let lr = config.lr;
        let optim = Optimizers {
            actor_q: AdamState::new(&actor.tensors(), lr),
            actor_info: AdamState::new(&actor.tensors(), lr),
            critic1: AdamState::new(&critic1.tensors(), lr),
            critic2: AdamState::new(&critic2.tensors(), lr),
            posterior: AdamState::new(&posterior.tensors(), lr),
        };
        let nets = AgentNets {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            posterior,
        };
        Ok(Self {
            config,
            env_spec,
            latent,
            nets,
            optim,
            counts: UpdateCounts::default(),
        })
    }

    pub fn config(&self) -> &Ltd3Config {
        &self.config
    }

    pub fn env_spec(&self) -> &EnvSpec {
        &self.env_spec
    }

    pub fn latent_spec(&self) -> LatentSpec {
        self.latent
    }

    /// Deterministic policy output `mu(s, z)`.
    pub fn policy(&self, s: &[f64], z: &Latent) -> Result<Vec<f64>> {
        let s = Matrix::row_vector(s);
        let z = Matrix::row_vector(&self.latent.encode(z));
        Ok(self.nets.actor.predict(&s, None, &z)?.into_vec())
    }

    /// `clip_box(mu(s,z) + eps)` with `eps ~ N(0, sigma^2)` per dimension;
    /// `explore_sigma` is a fraction of the action half-range.
    pub fn act<R: Rng + ?Sized>(&self, s: &[f64], z: &Latent, explore_sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.policy(s, z)?;
        if explore_sigma > 0.0 {
            for (ai, half) in a.iter_mut().zip(action_half_range(&self.env_spec)) {
                let noise = Normal::new(0.0, explore_sigma * half).map_err(|e| Error::Numeric(e.to_string()))?;
                *ai += noise.sample(rng);
            }
        }
        self.env_spec.clip_action(&mut a);
        Ok(a)
    }

    /// Bootstrapped targets `r + (1 - done) * gamma * min_i Q_i'(s', a', z)`.
    pub fn compute_target<R: Rng + ?Sized>(&self, batch: &Batch, rng: &mut R) -> Result<Vec<f64>> {
        let cfg = &self.config;
        let z = self.latent.encode_batch(&batch.z);
        let mut a_next = self.nets.actor_target.predict(&batch.s_next, None, &z)?;
        let half = action_half_range(&self.env_spec);
        if cfg.target_sigma > 0.0 {
            for r in 0..a_next.rows() {
                for (c, h) in half.iter().enumerate() {
                    let noise = Normal::new(0.0, cfg.target_sigma * h).map_err(|e| Error::Numeric(e.to_string()))?;
                    let clip = cfg.target_noise_clip * h;
                    let eps = noise.sample(rng).clamp(-clip, clip);
                    a_next.set(r, c, a_next.get(r, c) + eps);
                }
            }
        }
        for r in 0..a_next.rows() {
            self.env_spec.clip_action(a_next.row_mut(r));
        }
        let q1 = self.nets.critic1_target.predict(&batch.s_next, Some(&a_next), &z)?;
        let q2 = self.nets.critic2_target.predict(&batch.s_next, Some(&a_next), &z)?;
        let y = (0..batch.len())
            .map(|i| {
                let boot = if batch.done[i] { 0.0 } else { cfg.gamma * q1.get(i, 0).min(q2.get(i, 0)) };
                batch.r[i] + boot
            })
            .collect();
        Ok(y)
    }

    /// One Adam step on each critic's squared error. Returns both losses.
    pub fn critic_update(&mut self, batch: &Batch, y: &[f64]) -> Result<(f64, f64)> {
        let z = self.latent.encode_batch(&batch.z);
        let (l1, g1) = critic_loss(&self.nets.critic1, &batch.s, &batch.a, &z, y)?;
        let (l2, g2) = critic_loss(&self.nets.critic2, &batch.s, &batch.a, &z, y)?;
        self.optim.critic1.step(&mut self.nets.critic1.tensors_mut(), &g1, false)?;
        self.optim.critic2.step(&mut self.nets.critic2.tensors_mut(), &g2, false)?;
        self.counts.critic += 1;
        Ok((l1, l2))
    }

    /// One ascent step on `J_Q` followed by Polyak averaging of all targets.
    pub fn actor_q_update(&mut self, batch: &Batch) -> Result<f64> {
        let z = self.latent.encode_batch(&batch.z);
        let (value, grads) = actor_q_objective(&self.nets.actor, &self.nets.critic1, &batch.s, &z)?;
        self.optim.actor_q.step(&mut self.nets.actor.tensors_mut(), &grads, true)?;
        self.polyak(self.config.tau)?;
        self.counts.actor_q += 1;
        Ok(value)
    }

    pub fn polyak(&mut self, tau: f64) -> Result<()> {
        let n = &mut self.nets;
        n.actor_target.soft_update(&n.actor, tau)?;
        n.critic1_target.soft_update(&n.critic1, tau)?;
        n.critic2_target.soft_update(&n.critic2, tau)
    }

    /// Truncated importance weights from `Q1` on the stored actions.
    pub fn importance_weights(&self, batch: &Batch) -> Result<Vec<f64>> {
        let z = self.latent.encode_batch(&batch.z);
        let q = self.nets.critic1.predict(&batch.s, Some(&batch.a), &z)?;
        Ok(truncated_importance_weights(q.as_slice(), self.config.c_clip))
    }

    /// Joint ascent on actor and posterior for the weighted information
    /// objective.
    pub fn info_update(&mut self, batch: &Batch) -> Result<f64> {
        let w = self.importance_weights(batch)?;
        self.info_update_with_weights(batch, &w)
    }

    /// [`Self::info_update`] with caller-supplied weights.
    pub fn info_update_with_weights(&mut self, batch: &Batch, weights: &[f64]) -> Result<f64> {
        let z = self.latent.encode_batch(&batch.z);
        let info = info_objective(
            &self.nets.actor,
            &self.nets.posterior,
            &batch.s,
            &batch.z,
            &z,
            weights,
            self.config.alpha_info,
        )?;
        self.optim.actor_info.step(&mut self.nets.actor.tensors_mut(), &info.actor_grads, true)?;
        self.optim.posterior.step(&mut self.nets.posterior.tensors_mut(), &info.posterior_grads, true)?;
        self.counts.info += 1;
        Ok(info.value)
    }

    /// Maximum-likelihood discriminator step on stored `(s, a, z)`.
    pub fn posterior_update(&mut self, batch: &Batch) -> Result<f64> {
        let (value, grads) = posterior_log_likelihood(&self.nets.posterior, &batch.s, &batch.a, &batch.z)?;
        self.optim.posterior.step(&mut self.nets.posterior.tensors_mut(), &grads, true)?;
        self.counts.posterior += 1;
        Ok(value)
    }

    /// `log q(z | s, a)` for one pair; state-only posteriors ignore `a`.
    pub fn log_q(&self, s: &[f64], a: &[f64], z: &Latent) -> Result<f64> {
        let lq = self.nets.posterior.log_prob_batch(
            &Matrix::row_vector(s),
            &Matrix::row_vector(a),
            std::slice::from_ref(z),
        )?;
        Ok(lq[0])
    }

    pub fn mode(&self) -> BaselineMode {
        self.config.baseline_mode
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Env, PointVel, PointVelConfig};
    use crate::replay::{ReplayBuffer, Transition, TransitionDims};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_agent(seed: u64) -> (Agent, Env) {
        let env = Env::PointVel(PointVel::new(PointVelConfig::default()).unwrap());
        let cfg = Ltd3Config {
            hidden_sizes: vec![8, 8],
            batch: 16,
            ..Ltd3Config::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = Agent::new(cfg, env.spec().clone(), LatentSpec::new(2, 0).unwrap(), &mut rng).unwrap();
        (agent, env)
    }

    fn random_batch(agent: &Agent, n: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = agent.env_spec().clone();
        let dims = TransitionDims {
            state: spec.state_dim,
            action: spec.action_dim,
            latent_cont: 2,
            latent_disc: 0,
        };
        let mut buf = ReplayBuffer::new(n, dims).unwrap();
        for _ in 0..n {
            buf.push(Transition {
                s: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                a: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
                s_next: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                r: rng.random_range(-1.0..1.0),
                done: false,
                z: agent.latent_spec().sample(&mut rng),
            })
            .unwrap();
        }
        buf.sample_uniform(n, &mut rng).unwrap()
    }

    #[test]
    fn zero_noise_act_is_policy() {
        let (agent, _) = small_agent(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = Latent::continuous(vec![0.1, -0.4]);
        let s = [0.05, 0.2, -0.1];
        assert_eq!(agent.act(&s, &z, 0.0, &mut rng).unwrap(), agent.policy(&s, &z).unwrap());
    }

    #[test]
    fn exploration_noise_has_configured_scale() {
        let (agent, _) = small_agent(0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = Latent::continuous(vec![0.0, 0.0]);
        let s = [0.0, 0.0, 0.0];
        let mu = agent.policy(&s, &z).unwrap();
        assert!(mu.iter().all(|m| m.abs() < 0.5));
        let n = 10_000;
        let mut sq = 0.0;
        for _ in 0..n {
            let a = agent.act(&s, &z, 0.1, &mut rng).unwrap();
            sq += (a[0] - mu[0]).powi(2);
        }
        let std = (sq / n as f64).sqrt();
        assert!((std - 0.1).abs() < 0.005, "{std}");
    }

    #[test]
    fn edge_actions_are_clipped() {
        let (mut agent, _) = small_agent(0);
        // Push the actor's final bias far positive so tanh saturates at +1.
        let last = agent.nets.actor.tensors_mut().pop().unwrap();
        last.map_inplace(|_| 50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = Latent::continuous(vec![0.0, 0.0]);
        for _ in 0..100 {
            let a = agent.act(&[0.0, 0.0, 0.0], &z, 0.5, &mut rng).unwrap();
            assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn terminal_targets_equal_reward() {
        let (agent, _) = small_agent(1);
        let mut batch = random_batch(&agent, 8, 2);
        batch.done = vec![true; 8];
        batch.r = vec![1.0; 8];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(agent.compute_target(&batch, &mut rng).unwrap().iter().all(|y| *y == 1.0));
    }

    fn constant_critic(agent: &mut Agent, value: f64, which: u8) {
        let net = if which == 1 {
            &mut agent.nets.critic1_target
        } else {
            &mut agent.nets.critic2_target
        };
        let n = net.tensors().len();
        for (i, t) in net.tensors_mut().into_iter().enumerate() {
            let v = if i == n - 1 { value } else { 0.0 };
            t.map_inplace(|_| v);
        }
    }

    #[test]
    fn target_uses_twin_minimum() {
        let (mut agent, _) = small_agent(1);
        agent.config.target_sigma = 0.0;
        constant_critic(&mut agent, 5.0, 1);
        constant_critic(&mut agent, 3.0, 2);
        let mut batch = random_batch(&agent, 4, 3);
        batch.r = vec![1.0; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for y in agent.compute_target(&batch, &mut rng).unwrap() {
            assert!((y - (1.0 + 0.99 * 3.0)).abs() < 1e-12);
        }
        constant_critic(&mut agent, 2.0, 1);
        for y in agent.compute_target(&batch, &mut rng).unwrap() {
            assert!((y - 2.98).abs() < 1e-12);
        }
    }

    #[test]
    fn critic_overfits_one_batch() {
        let (mut agent, _) = small_agent(2);
        agent.optim.critic1.lr = 1e-3;
        agent.optim.critic2.lr = 1e-3;
        let batch = random_batch(&agent, 16, 4);
        let y: Vec<f64> = batch.r.clone();
        let losses: Vec<f64> = (0..1000).map(|_| agent.critic_update(&batch, &y).unwrap().0).collect();
        // Adam jitters step to step near the optimum; averaged over windows
        // of 100 updates the loss must fall every time.
        let windows: Vec<f64> = losses.chunks(100).map(|c| c.iter().sum::<f64>() / 100.0).collect();
        for pair in windows.windows(2) {
            assert!(pair[1] < pair[0], "{windows:?}");
        }
        assert!(losses[999] < 0.01 * losses[0], "{} -> {}", losses[0], losses[999]);
    }

    #[test]
    fn polyak_is_exact_moving_average() {
        let (mut agent, _) = small_agent(3);
        let batch = random_batch(&agent, 16, 5);
        let y = batch.r.clone();
        agent.critic_update(&batch, &y).unwrap();
        let before = agent.nets.critic1_target.flat_params();
        let online = agent.nets.critic1.flat_params();
        agent.polyak(0.005).unwrap();
        let after = agent.nets.critic1_target.flat_params();
        for ((b, o), a) in before.iter().zip(&online).zip(&after) {
            assert!((a - (0.995 * b + 0.005 * o)).abs() < 1e-15);
        }
        agent.polyak(1.0).unwrap();
        assert_eq!(agent.nets.critic1_target, agent.nets.critic1);
        assert_eq!(agent.nets.actor_target, agent.nets.actor);
    }

    #[test]
    fn zero_weights_leave_parameters_unchanged() {
        let (mut agent, _) = small_agent(4);
        let batch = random_batch(&agent, 16, 6);
        let before = agent.nets.clone();
        agent.info_update_with_weights(&batch, &[0.0; 16]).unwrap();
        assert_eq!(agent.nets, before);
    }

    #[test]
    fn posterior_regresses_linear_latent() {
        // z is a fixed linear function of (s, a); the actor is frozen.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let env_spec = crate::envs::EnvSpec {
            state_dim: 2,
            action_dim: 1,
            action_low: vec![-1.0],
            action_high: vec![1.0],
            horizon: 1,
            discrete_actions: None,
            dt: None,
        };
        let cfg = Ltd3Config {
            hidden_sizes: vec![32, 32],
            lr: 1e-3,
            baseline_mode: BaselineMode::Td3DiaynSa,
            ..Ltd3Config::default()
        };
        let spec = LatentSpec::new(1, 0).unwrap();
        let mut agent = Agent::new(cfg, env_spec, spec, &mut rng).unwrap();
        let dims = TransitionDims {
            state: 2,
            action: 1,
            latent_cont: 1,
            latent_disc: 0,
        };
        let mut buf = ReplayBuffer::new(512, dims).unwrap();
        for _ in 0..512 {
            let s: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = vec![rng.random_range(-1.0..1.0)];
            let z = 0.4 * s[0] - 0.3 * s[1] + 0.3 * a[0];
            buf.push(Transition {
                s: s.clone(),
                a,
                s_next: s,
                r: 0.0,
                done: false,
                z: Latent::continuous(vec![z]),
            })
            .unwrap();
        }
        let actor = agent.nets.actor.clone();
        let mut last = f64::NEG_INFINITY;
        for _ in 0..2000 {
            let batch = buf.sample_uniform(64, &mut rng).unwrap();
            last = agent.posterior_update(&batch).unwrap();
        }
        let all: Vec<&Transition> = buf.iter_ordered().collect();
        let full = Batch::from_transitions(&all, dims);
        let mean = agent.nets.posterior.log_prob_batch(&full.s, &full.a, &full.z).unwrap();
        let mean = mean.iter().sum::<f64>() / mean.len() as f64;
        assert!(mean > -0.5, "mean log q {mean} (last batch {last})");
        assert_eq!(agent.nets.actor, actor);
    }
}
