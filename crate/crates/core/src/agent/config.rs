use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineMode {
    /// Importance-weighted information term maximized by backpropagation.
    Ltd3,
    /// Plain TD3 on latent-augmented networks; the latent is never trained against.
    Td3,
    /// Intrinsic reward `beta * log q(z|s)`.
    Td3DiaynS,
    /// Intrinsic reward `beta * log q(z|s,a)`.
    Td3DiaynSa,
    /// State-only intrinsic reward, granted only for near-optimal episodes.
    SmerlGate,
}

impl BaselineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMode::Ltd3 => "ltd3",
            BaselineMode::Td3 => "td3",
            BaselineMode::Td3DiaynS => "td3_diayn_s",
            BaselineMode::Td3DiaynSa => "td3_diayn_sa",
            BaselineMode::SmerlGate => "smerl_gate",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ltd3" => BaselineMode::Ltd3,
            "td3" => BaselineMode::Td3,
            "td3_diayn_s" => BaselineMode::Td3DiaynS,
            "td3_diayn_sa" => BaselineMode::Td3DiaynSa,
            "smerl_gate" | "smerl" => BaselineMode::SmerlGate,
            other => return Err(Error::Config(format!("unknown baseline mode '{other}'"))),
        })
    }

    /// Modes that shape rewards with a learned discriminator.
    pub fn uses_intrinsic_reward(self) -> bool {
        matches!(
            self,
            BaselineMode::Td3DiaynS | BaselineMode::Td3DiaynSa | BaselineMode::SmerlGate
        )
    }

    /// Whether the discriminator conditions on the action as well as the state.
    pub fn posterior_sees_action(self) -> bool {
        !matches!(self, BaselineMode::Td3DiaynS | BaselineMode::SmerlGate)
    }
}

/// Learner hyperparameters. Noise scales are fractions of the action
/// half-range (TD3's `max_action` convention).
#[derive(Clone, Debug, PartialEq)]
pub struct Ltd3Config {
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pub tau: f64,
    pub c_clip: f64,
    pub d_atr: u64,
    pub d_info: u64,
    pub explore_sigma: f64,
    pub target_sigma: f64,
    pub target_noise_clip: f64,
    pub alpha_info: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub baseline_mode: BaselineMode,
    pub beta_intrinsic: f64,
    pub eps_smerl: f64,
    /// Reference optimal return for SMERL gating; `None` means "derive from
    /// the environment" where a scripted oracle exists.
    pub r_star: Option<f64>,
    pub hidden_sizes: Vec<usize>,
    pub latent_embed_dim: usize,
    pub buffer_capacity: usize,
}

impl Default for Ltd3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 3e-4,
            batch: 256,
            tau: 0.005,
            c_clip: 0.3,
            d_atr: 2,
            d_info: 4,
            explore_sigma: 0.1,
            target_sigma: 0.2,
            target_noise_clip: 0.5,
            alpha_info: 1.0,
            warmup_steps: 1000,
            total_steps: 1_000_000,
            baseline_mode: BaselineMode::Ltd3,
            beta_intrinsic: 0.5,
            eps_smerl: 0.1,
            r_star: None,
            hidden_sizes: vec![256, 256],
            latent_embed_dim: 8,
            buffer_capacity: 1_000_000,
        }
    }
}

impl Ltd3Config {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.c_clip > 0.0) {
            return fail("c_clip must be positive");
        }
        if self.d_atr == 0 || self.d_info == 0 {
            return fail("d_atr and d_info must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail("tau must lie in (0, 1]");
        }
        if !(self.lr > 0.0) || self.batch == 0 {
            return fail("lr and batch must be positive");
        }
        if self.explore_sigma < 0.0 || self.target_sigma < 0.0 || self.target_noise_clip < 0.0 {
            return fail("noise scales must be non-negative");
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) || self.latent_embed_dim == 0 {
            return fail("hidden sizes and latent embedding width must be positive");
        }
        if self.buffer_capacity == 0 {
            return fail("buffer capacity must be positive");
        }
        Ok(())
    }
}
