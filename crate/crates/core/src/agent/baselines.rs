//! Reward shaping for the discriminator-based baselines.

use super::config::BaselineMode;

/// `beta * log q`, the intrinsic reward added to the task reward before
/// insertion. Modes without a discriminator contribute nothing.
pub fn unsupervised_reward(mode: BaselineMode, log_q: f64, beta: f64) -> f64 {
    if mode.uses_intrinsic_reward() && beta != 0.0 {
        beta * log_q
    } else {
        0.0
    }
}

/// 1 when the episode return is within `eps` of the reference return.
pub fn smerl_gate(episode_return: f64, r_star: f64, eps: f64) -> f64 {
    if episode_return > r_star - eps {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_beta_is_task_reward_only() {
        assert_eq!(unsupervised_reward(BaselineMode::Td3DiaynSa, -3.0, 0.0), 0.0);
        assert_eq!(unsupervised_reward(BaselineMode::Ltd3, -3.0, 0.5), 0.0);
    }

    #[test]
    fn chance_posterior_reward() {
        let r = unsupervised_reward(BaselineMode::Td3DiaynS, (1.0f64 / 3.0).ln(), 0.5);
        assert!((r - 0.5 * (1.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn gate_is_strict_with_margin() {
        assert_eq!(smerl_gate(10.0, 10.0, 0.1), 1.0);
        assert_eq!(smerl_gate(10.0 - 0.2, 10.0, 0.1), 0.0);
        assert_eq!(smerl_gate(10.0 - 0.1, 10.0, 0.1), 0.0);
    }
}
