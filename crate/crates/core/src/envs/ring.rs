//! A ring of states where stepping clockwise everywhere and stepping
//! counter-clockwise everywhere visit every state equally often and earn the
//! same expected return, yet disagree on the action in every state.

use std::collections::BTreeSet;

use rand::Rng;

use super::{EnvSpec, EnvState, Physical, StepOutcome};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RingMdpConfig {
    pub n_states: usize,
    pub reward_states: BTreeSet<usize>,
    pub horizon: usize,
}

impl Default for RingMdpConfig {
    fn default() -> Self {
        Self {
            n_states: 4,
            reward_states: [0, 3].into_iter().collect(),
            horizon: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RingAction {
    Clockwise,
    CounterClockwise,
}

impl RingAction {
    /// Continuous encoding used by actors: `+1` clockwise, `-1` counter-clockwise.
    pub fn encode(self) -> f64 {
        match self {
            RingAction::Clockwise => 1.0,
            RingAction::CounterClockwise => -1.0,
        }
    }

    pub fn decode(value: f64) -> Self {
        if value >= 0.0 {
            RingAction::Clockwise
        } else {
            RingAction::CounterClockwise
        }
    }

    pub fn index(self) -> usize {
        match self {
            RingAction::Clockwise => 0,
            RingAction::CounterClockwise => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingMdp {
    config: RingMdpConfig,
    spec: EnvSpec,
}

impl RingMdp {
    pub fn new(config: RingMdpConfig) -> Result<Self> {
        if config.n_states < 2 {
            return Err(Error::Config("ring needs at least two states".into()));
        }
        if config.horizon == 0 {
            return Err(Error::Config("ring horizon must be at least 1".into()));
        }
        if let Some(bad) = config.reward_states.iter().find(|&&s| s >= config.n_states) {
            return Err(Error::Config(format!(
                "reward state {bad} outside ring of {} states",
                config.n_states
            )));
        }
        let spec = EnvSpec {
            state_dim: config.n_states,
            action_dim: 1,
            action_low: vec![-1.0],
            action_high: vec![1.0],
            horizon: config.horizon,
            discrete_actions: Some(2),
            dt: None,
        };
        Ok(Self { config, spec })
    }

    pub fn config(&self) -> &RingMdpConfig {
        &self.config
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state_at(&self, index: usize, time_step: usize) -> EnvState {
        let mut observation = vec![0.0; self.config.n_states];
        observation[index] = 1.0;
        EnvState {
            observation,
            time_step,
            terminated: time_step >= self.config.horizon,
            physical: Physical::Ring { index },
        }
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        self.state_at(rng.random_range(0..self.config.n_states), 0)
    }

    /// Index and reward after taking `action` in ring state `index`.
    pub fn transition(&self, index: usize, action: RingAction) -> (usize, f64) {
        let n = self.config.n_states;
        let next = match action {
            RingAction::Clockwise => (index + 1) % n,
            RingAction::CounterClockwise => (index + n - 1) % n,
        };
        let reward = if self.config.reward_states.contains(&next) { 1.0 } else { 0.0 };
        (next, reward)
    }

    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepOutcome> {
        if state.terminated {
            return Err(Error::State("step after episode termination".into()));
        }
        let Physical::Ring { index } = state.physical else {
            return Err(Error::State("ring stepped with a non-ring state".into()));
        };
        if action.len() != 1 || !action[0].is_finite() {
            return Err(Error::Dimension("ring expects one finite action value".into()));
        }
        let (next, reward) = self.transition(index, RingAction::decode(action[0]));
        Ok(StepOutcome {
            state: self.state_at(next, state.time_step + 1),
            reward,
            done: false,
        })
    }

    /// Return of always taking `action` from `start` for `horizon` steps.
    pub fn constant_policy_return(&self, start: usize, action: RingAction, horizon: usize) -> f64 {
        let mut index = start;
        let mut total = 0.0;
        for _ in 0..horizon {
            let (next, r) = self.transition(index, action);
            index = next;
            total += r;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ring() -> RingMdp {
        RingMdp::new(RingMdpConfig::default()).unwrap()
    }

    #[test]
    fn clockwise_from_first_state() {
        let env = ring();
        let out = env.step(&env.state_at(0, 0), &[1.0]).unwrap();
        assert_eq!(out.state.ring_index(), Some(1));
        assert_eq!(out.reward, 0.0);
        let back = env.step(&env.state_at(0, 0), &[-1.0]).unwrap();
        assert_eq!(back.state.ring_index(), Some(3));
        assert_eq!(back.reward, 1.0);
    }

    #[test]
    fn constant_policies_tie_from_uniform_start() {
        // Exact enumeration over start states, for every horizon up to 3 laps.
        let env = ring();
        for horizon in 1..=12 {
            let cw: f64 = (0..4)
                .map(|s| env.constant_policy_return(s, RingAction::Clockwise, horizon))
                .sum();
            let ccw: f64 = (0..4)
                .map(|s| env.constant_policy_return(s, RingAction::CounterClockwise, horizon))
                .sum();
            assert_eq!(cw, ccw, "horizon {horizon}");
        }
    }

    #[test]
    fn constant_policies_tie_per_start_over_whole_laps() {
        let env = ring();
        for start in 0..4 {
            for laps in 1..=4 {
                let h = 4 * laps;
                assert_eq!(
                    env.constant_policy_return(start, RingAction::Clockwise, h),
                    env.constant_policy_return(start, RingAction::CounterClockwise, h)
                );
            }
        }
    }

    #[test]
    fn stationary_distribution_is_uniform() {
        let env = ring();
        for action in [RingAction::Clockwise, RingAction::CounterClockwise] {
            let mut p = vec![1.0, 0.0, 0.0, 0.0];
            let mut avg = vec![0.0; 4];
            // Permutation chains are periodic; Cesaro averages converge.
            let iters = 4000;
            for _ in 0..iters {
                let mut next = vec![0.0; 4];
                for (s, ps) in p.iter().enumerate() {
                    next[env.transition(s, action).0] += ps;
                }
                p = next;
                for (a, v) in avg.iter_mut().zip(&p) {
                    *a += v / iters as f64;
                }
            }
            for a in avg {
                assert!((a - 0.25).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn terminal_state_rejects_steps() {
        let env = ring();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = env.reset(&mut rng);
        for _ in 0..16 {
            s = env.step(&s, &[1.0]).unwrap().state;
        }
        assert!(s.terminated);
        assert!(matches!(env.step(&s, &[1.0]), Err(Error::State(_))));
    }

    #[test]
    fn uniform_resets() {
        let env = ring();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[env.reset(&mut rng).ring_index().unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn invalid_reward_state_rejected() {
        let cfg = RingMdpConfig {
            reward_states: [5].into_iter().collect(),
            ..Default::default()
        };
        assert!(RingMdp::new(cfg).is_err());
    }
}
