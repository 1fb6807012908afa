//! Run configuration as flat `key = value` text.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Unknown keys, duplicates and unparsable values are errors that
//! name the key. The canonical text lists every key in a fixed order and is
//! what the configuration hash covers; `out_dir` is excluded so identical
//! runs in different directories hash alike.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::agent::{BaselineMode, LatentSpec, Ltd3Config};
use crate::envs::{scripted_controller_return, Env, PointVel, PointVelConfig, PointVelVariant, RingMdp, RingMdpConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Ring,
    PointVel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantKind {
    Train,
    Blocked,
    Drift,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub ring_n_states: usize,
    pub ring_reward_states: Vec<usize>,
    pub ring_horizon: usize,
    pub pv_v_max: f64,
    pub pv_dt: f64,
    pub pv_ctrl_cost: f64,
    pub pv_accel_gain: f64,
    pub pv_speed_limit: f64,
    pub pv_horizon: usize,
    pub pv_variant: VariantKind,
    pub pv_block_y_low: f64,
    pub pv_block_y_high: f64,
    pub pv_block_penalty: f64,
    pub pv_drift_force: f64,
    pub latent_cont: usize,
    pub latent_disc: usize,
    pub agent: Ltd3Config,
    pub seed: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub eval_latents: usize,
    pub embed_episodes: usize,
    pub kernel_h: f64,
    pub mi_samples: usize,
    pub checkpoint_interval: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ring = RingMdpConfig::default();
        let pv = PointVelConfig::default();
        Self {
            env: EnvKind::PointVel,
            ring_n_states: ring.n_states,
            ring_reward_states: ring.reward_states.into_iter().collect(),
            ring_horizon: ring.horizon,
            pv_v_max: pv.v_max,
            pv_dt: pv.dt,
            pv_ctrl_cost: pv.ctrl_cost,
            pv_accel_gain: pv.accel_gain,
            pv_speed_limit: pv.speed_limit,
            pv_horizon: pv.horizon,
            pv_variant: VariantKind::Train,
            pv_block_y_low: -0.25,
            pv_block_y_high: 0.25,
            pv_block_penalty: 1.0,
            pv_drift_force: 1.0,
            latent_cont: 2,
            latent_disc: 0,
            agent: Ltd3Config::default(),
            seed: 0,
            eval_interval: 5000,
            eval_episodes: 10,
            eval_latents: 8,
            embed_episodes: 1,
            kernel_h: 1.0,
            mi_samples: 1000,
            checkpoint_interval: 0,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// One-line descriptions of every key, in canonical order.
pub const KEY_HELP: &[(&str, &str)] = &[
    ("env", "environment: ring | pointvel"),
    ("ring_n_states", "ring: number of states"),
    ("ring_reward_states", "ring: comma-separated rewarding state indices"),
    ("ring_horizon", "ring: episode length"),
    ("pv_v_max", "point mass: forward-speed reward cap"),
    ("pv_dt", "point mass: integration step (s)"),
    ("pv_ctrl_cost", "point mass: coefficient on squared action norm"),
    ("pv_accel_gain", "point mass: acceleration per unit action"),
    ("pv_speed_limit", "point mass: per-axis speed clamp"),
    ("pv_horizon", "point mass: episode length"),
    ("pv_variant", "point mass: train | blocked | drift"),
    ("pv_block_y_low", "blocked variant: lower edge of the penalized band"),
    ("pv_block_y_high", "blocked variant: upper edge of the penalized band"),
    ("pv_block_penalty", "blocked variant: per-step penalty inside the band"),
    ("pv_drift_force", "drift variant: lateral acceleration"),
    ("latent_cont", "continuous latent dimensions, uniform on [-1, 1]"),
    ("latent_disc", "discrete latent classes (0 for none)"),
    ("gamma", "discount factor"),
    ("lr", "Adam learning rate for every network"),
    ("batch", "mini-batch size"),
    ("tau", "target-network averaging coefficient"),
    ("c_clip", "importance-weight clipping parameter"),
    ("d_atr", "actor and target update interval (steps)"),
    ("d_info", "information update interval (steps)"),
    ("explore_sigma", "exploration noise std, fraction of the action half-range"),
    ("target_sigma", "target smoothing noise std, fraction of the action half-range"),
    ("target_noise_clip", "target smoothing noise clip, fraction of the action half-range"),
    ("alpha_info", "weight of the information objective"),
    ("warmup_steps", "uniform-random steps before any update"),
    ("total_steps", "environment steps per run"),
    ("baseline_mode", "ltd3 | td3 | td3_diayn_s | td3_diayn_sa | smerl_gate"),
    ("beta_intrinsic", "intrinsic reward weight for discriminator baselines"),
    ("eps_smerl", "gating margin below the reference return"),
    ("r_star", "reference optimal return for gating, or 'auto'"),
    ("hidden_sizes", "comma-separated hidden layer widths"),
    ("latent_embed_dim", "width of the latent embedding layer"),
    ("buffer_capacity", "replay buffer capacity"),
    ("seed", "master seed"),
    ("eval_interval", "steps between evaluations"),
    ("eval_episodes", "deterministic episodes per evaluation"),
    ("eval_latents", "latents sampled for the diversity score"),
    ("embed_episodes", "episodes per behaviour embedding"),
    ("kernel_h", "length scale of the diversity kernel"),
    ("mi_samples", "recent transitions used for the information bound"),
    ("checkpoint_interval", "steps between checkpoints (0: initial and final only)"),
    ("out_dir", "output directory (not hashed)"),
];

impl RunConfig {
    pub fn keys() -> impl Iterator<Item = &'static str> {
        KEY_HELP.iter().map(|(k, _)| *k)
    }

    /// Value of one key as text.
    pub fn get(&self, key: &str) -> Result<String> {
        let a = &self.agent;
        Ok(match key {
            "env" => match self.env {
                EnvKind::Ring => "ring".into(),
                EnvKind::PointVel => "pointvel".into(),
            },
            "ring_n_states" => self.ring_n_states.to_string(),
            "ring_reward_states" => join(&self.ring_reward_states),
            "ring_horizon" => self.ring_horizon.to_string(),
            "pv_v_max" => self.pv_v_max.to_string(),
            "pv_dt" => self.pv_dt.to_string(),
            "pv_ctrl_cost" => self.pv_ctrl_cost.to_string(),
            "pv_accel_gain" => self.pv_accel_gain.to_string(),
            "pv_speed_limit" => self.pv_speed_limit.to_string(),
            "pv_horizon" => self.pv_horizon.to_string(),
            "pv_variant" => match self.pv_variant {
                VariantKind::Train => "train".into(),
                VariantKind::Blocked => "blocked".into(),
                VariantKind::Drift => "drift".into(),
            },
            "pv_block_y_low" => self.pv_block_y_low.to_string(),
            "pv_block_y_high" => self.pv_block_y_high.to_string(),
            "pv_block_penalty" => self.pv_block_penalty.to_string(),
            "pv_drift_force" => self.pv_drift_force.to_string(),
            "latent_cont" => self.latent_cont.to_string(),
            "latent_disc" => self.latent_disc.to_string(),
            "gamma" => a.gamma.to_string(),
            "lr" => a.lr.to_string(),
            "batch" => a.batch.to_string(),
            "tau" => a.tau.to_string(),
            "c_clip" => a.c_clip.to_string(),
            "d_atr" => a.d_atr.to_string(),
            "d_info" => a.d_info.to_string(),
            "explore_sigma" => a.explore_sigma.to_string(),
            "target_sigma" => a.target_sigma.to_string(),
            "target_noise_clip" => a.target_noise_clip.to_string(),
            "alpha_info" => a.alpha_info.to_string(),
            "warmup_steps" => a.warmup_steps.to_string(),
            "total_steps" => a.total_steps.to_string(),
            "baseline_mode" => a.baseline_mode.as_str().into(),
            "beta_intrinsic" => a.beta_intrinsic.to_string(),
            "eps_smerl" => a.eps_smerl.to_string(),
            "r_star" => a.r_star.map_or_else(|| "auto".into(), |r| r.to_string()),
            "hidden_sizes" => join(&a.hidden_sizes),
            "latent_embed_dim" => a.latent_embed_dim.to_string(),
            "buffer_capacity" => a.buffer_capacity.to_string(),
            "seed" => self.seed.to_string(),
            "eval_interval" => self.eval_interval.to_string(),
            "eval_episodes" => self.eval_episodes.to_string(),
            "eval_latents" => self.eval_latents.to_string(),
            "embed_episodes" => self.embed_episodes.to_string(),
            "kernel_h" => self.kernel_h.to_string(),
            "mi_samples" => self.mi_samples.to_string(),
            "checkpoint_interval" => self.checkpoint_interval.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let a = &mut self.agent;
        match key {
            "env" => {
                self.env = match v {
                    "ring" => EnvKind::Ring,
                    "pointvel" => EnvKind::PointVel,
                    _ => return Err(Error::Config(format!("env: unknown environment '{v}'"))),
                }
            }
            "ring_n_states" => self.ring_n_states = parse(key, v)?,
            "ring_reward_states" => self.ring_reward_states = parse_list(key, v)?,
            "ring_horizon" => self.ring_horizon = parse(key, v)?,
            "pv_v_max" => self.pv_v_max = parse(key, v)?,
            "pv_dt" => self.pv_dt = parse(key, v)?,
            "pv_ctrl_cost" => self.pv_ctrl_cost = parse(key, v)?,
            "pv_accel_gain" => self.pv_accel_gain = parse(key, v)?,
            "pv_speed_limit" => self.pv_speed_limit = parse(key, v)?,
            "pv_horizon" => self.pv_horizon = parse(key, v)?,
            "pv_variant" => {
                self.pv_variant = match v {
                    "train" => VariantKind::Train,
                    "blocked" => VariantKind::Blocked,
                    "drift" => VariantKind::Drift,
                    _ => return Err(Error::Config(format!("pv_variant: unknown variant '{v}'"))),
                }
            }
            "pv_block_y_low" => self.pv_block_y_low = parse(key, v)?,
            "pv_block_y_high" => self.pv_block_y_high = parse(key, v)?,
            "pv_block_penalty" => self.pv_block_penalty = parse(key, v)?,
            "pv_drift_force" => self.pv_drift_force = parse(key, v)?,
            "latent_cont" => self.latent_cont = parse(key, v)?,
            "latent_disc" => self.latent_disc = parse(key, v)?,
            "gamma" => a.gamma = parse(key, v)?,
            "lr" => a.lr = parse(key, v)?,
            "batch" => a.batch = parse(key, v)?,
            "tau" => a.tau = parse(key, v)?,
            "c_clip" => a.c_clip = parse(key, v)?,
            "d_atr" => a.d_atr = parse(key, v)?,
            "d_info" => a.d_info = parse(key, v)?,
            "explore_sigma" => a.explore_sigma = parse(key, v)?,
            "target_sigma" => a.target_sigma = parse(key, v)?,
            "target_noise_clip" => a.target_noise_clip = parse(key, v)?,
            "alpha_info" => a.alpha_info = parse(key, v)?,
            "warmup_steps" => a.warmup_steps = parse(key, v)?,
            "total_steps" => a.total_steps = parse(key, v)?,
            "baseline_mode" => {
                a.baseline_mode = BaselineMode::parse(v).map_err(|_| Error::Config(format!("baseline_mode: unknown mode '{v}'")))?
            }
            "beta_intrinsic" => a.beta_intrinsic = parse(key, v)?,
            "eps_smerl" => a.eps_smerl = parse(key, v)?,
            "r_star" => a.r_star = if v == "auto" { None } else { Some(parse(key, v)?) },
            "hidden_sizes" => a.hidden_sizes = parse_list(key, v)?,
            "latent_embed_dim" => a.latent_embed_dim = parse(key, v)?,
            "buffer_capacity" => a.buffer_capacity = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "eval_interval" => self.eval_interval = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "eval_latents" => self.eval_latents = parse(key, v)?,
            "embed_episodes" => self.embed_episodes = parse(key, v)?,
            "kernel_h" => self.kernel_h = parse(key, v)?,
            "mi_samples" => self.mi_samples = parse(key, v)?,
            "checkpoint_interval" => self.checkpoint_interval = parse(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("{key}: given more than once")));
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file; a missing or unreadable file is a config error
    /// naming the path.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Every key except `out_dir`, one `key = value` per line.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        for key in Self::keys().filter(|k| *k != "out_dir") {
            s.push_str(key);
            s.push_str(" = ");
            s.push_str(&self.get(key).expect("known key"));
            s.push('\n');
        }
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }

    /// `key = default  # description` for every key.
    pub fn defaults_listing() -> String {
        let d = Self::default();
        KEY_HELP
            .iter()
            .map(|(k, help)| format!("  {k} = {}  # {help}\n", d.get(k).expect("known key")))
            .collect()
    }

    pub fn latent_spec(&self) -> Result<LatentSpec> {
        LatentSpec::new(self.latent_cont, self.latent_disc)
    }

    fn pointvel_config(&self, variant: VariantKind) -> PointVelConfig {
        PointVelConfig {
            v_max: self.pv_v_max,
            dt: self.pv_dt,
            ctrl_cost: self.pv_ctrl_cost,
            accel_gain: self.pv_accel_gain,
            speed_limit: self.pv_speed_limit,
            horizon: self.pv_horizon,
            variant: match variant {
                VariantKind::Train => PointVelVariant::Train,
                VariantKind::Blocked => PointVelVariant::Blocked {
                    y_low: self.pv_block_y_low,
                    y_high: self.pv_block_y_high,
                    penalty: self.pv_block_penalty,
                },
                VariantKind::Drift => PointVelVariant::Drift {
                    lateral_force: self.pv_drift_force,
                },
            },
        }
    }

    pub fn build_env(&self) -> Result<Env> {
        Ok(match self.env {
            EnvKind::Ring => Env::Ring(RingMdp::new(RingMdpConfig {
                n_states: self.ring_n_states,
                reward_states: self.ring_reward_states.iter().copied().collect(),
                horizon: self.ring_horizon,
            })?),
            EnvKind::PointVel => Env::PointVel(PointVel::new(self.pointvel_config(self.pv_variant))?),
        })
    }

    /// Reference optimal return: the explicit `r_star`, else the scripted
    /// controller on the point mass's training variant.
    pub fn reference_return(&self) -> Option<f64> {
        self.agent.r_star.or_else(|| match self.env {
            EnvKind::PointVel => PointVel::new(self.pointvel_config(VariantKind::Train))
                .ok()
                .map(|env| scripted_controller_return(&env, 0.0)),
            EnvKind::Ring => None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.latent_spec()?;
        self.build_env()?;
        let positive = [
            ("eval_interval", self.eval_interval as usize),
            ("eval_episodes", self.eval_episodes),
            ("eval_latents", self.eval_latents),
            ("embed_episodes", self.embed_episodes),
            ("mi_samples", self.mi_samples),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{key} must be at least 1")));
            }
        }
        if !(self.kernel_h > 0.0) {
            return Err(Error::Config("kernel_h must be positive".into()));
        }
        if self.agent.baseline_mode == BaselineMode::SmerlGate && self.reference_return().is_none() {
            return Err(Error::Config("r_star: smerl_gate on this environment needs an explicit value".into()));
        }
        Ok(())
    }
}
