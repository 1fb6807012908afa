//! A planar point mass rewarded for forward speed up to a cap.
//!
//! Once the forward velocity reaches `v_max` any lateral behaviour is equally
//! good up to control cost, so the task has a continuum of optimal policies.
//! Observations are `[y, v_x, v_y]`; the forward position is not observed.

use rand::Rng;

use super::{EnvSpec, EnvState, Physical, StepOutcome};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum PointVelVariant {
    Train,
    /// Per-step penalty while `y_low <= y <= y_high`.
    Blocked { y_low: f64, y_high: f64, penalty: f64 },
    /// Constant lateral acceleration added to `v_y` before integration.
    Drift { lateral_force: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointVelConfig {
    pub v_max: f64,
    pub dt: f64,
    pub ctrl_cost: f64,
    pub accel_gain: f64,
    pub speed_limit: f64,
    pub horizon: usize,
    pub variant: PointVelVariant,
}

impl Default for PointVelConfig {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            dt: 0.05,
            ctrl_cost: 0.05,
            accel_gain: 4.0,
            speed_limit: 2.0,
            horizon: 200,
            variant: PointVelVariant::Train,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointVel {
    config: PointVelConfig,
    spec: EnvSpec,
}

impl PointVel {
    pub fn new(config: PointVelConfig) -> Result<Self> {
        if !(config.v_max > 0.0 && config.v_max <= config.speed_limit) {
            return Err(Error::Config(format!(
                "need 0 < v_max <= speed_limit, got v_max={} speed_limit={}",
                config.v_max, config.speed_limit
            )));
        }
        if !(config.dt > 0.0) || config.horizon == 0 {
            return Err(Error::Config("need dt > 0 and horizon >= 1".into()));
        }
        if let PointVelVariant::Blocked { y_low, y_high, .. } = config.variant {
            if y_low > y_high {
                return Err(Error::Config("blocked band has y_low > y_high".into()));
            }
        }
        let spec = EnvSpec {
            state_dim: 3,
            action_dim: 2,
            action_low: vec![-1.0, -1.0],
            action_high: vec![1.0, 1.0],
            horizon: config.horizon,
            discrete_actions: None,
            dt: Some(config.dt),
        };
        Ok(Self { config, spec })
    }

    pub fn config(&self) -> &PointVelConfig {
        &self.config
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state_from(&self, pos: [f64; 2], vel: [f64; 2], time_step: usize) -> EnvState {
        EnvState {
            observation: vec![pos[1], vel[0], vel[1]],
            time_step,
            terminated: time_step >= self.config.horizon,
            physical: Physical::Point { pos, vel },
        }
    }

    /// Starts at `(0, y0)` with `y0 ~ U[-0.1, 0.1]`, at rest.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let y0 = rng.random_range(-0.1..=0.1);
        self.state_from([0.0, y0], [0.0, 0.0], 0)
    }

    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepOutcome> {
        if state.terminated {
            return Err(Error::State("step after episode termination".into()));
        }
        let Physical::Point { pos, vel } = state.physical else {
            return Err(Error::State("point mass stepped with a non-point state".into()));
        };
        if action.len() != 2 {
            return Err(Error::Dimension(format!(
                "point mass expects 2 action values, got {}",
                action.len()
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numeric("non-finite action".into()));
        }
        let mut a = [action[0], action[1]];
        if a.iter().any(|v| v.abs() > 1.0) {
            log::warn!("action {a:?} outside [-1, 1]^2; clipping");
            a = [a[0].clamp(-1.0, 1.0), a[1].clamp(-1.0, 1.0)];
        }
        let c = &self.config;
        let mut v = [
            vel[0] + c.accel_gain * a[0] * c.dt,
            vel[1] + c.accel_gain * a[1] * c.dt,
        ];
        if let PointVelVariant::Drift { lateral_force } = c.variant {
            v[1] += lateral_force * c.dt;
        }
        for vi in &mut v {
            *vi = vi.clamp(-c.speed_limit, c.speed_limit);
        }
        let next = [pos[0] + v[0] * c.dt, pos[1] + v[1] * c.dt];
        if next.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::Numeric("point mass state became non-finite".into()));
        }
        let forward = ((next[0] - pos[0]) / c.dt).min(c.v_max);
        let mut reward = forward - c.ctrl_cost * (a[0] * a[0] + a[1] * a[1]);
        if let PointVelVariant::Blocked {
            y_low,
            y_high,
            penalty,
        } = c.variant
        {
            if (y_low..=y_high).contains(&next[1]) {
                reward -= penalty;
            }
        }
        Ok(StepOutcome {
            state: self.state_from(next, v, state.time_step + 1),
            reward,
            done: false,
        })
    }
}

/// Return of the scripted controller that thrusts fully forward until the
/// forward velocity reaches `v_max` and then coasts with zero action. Serves
/// as the reference optimal return `R*`.
pub fn scripted_controller_return(env: &PointVel, y0: f64) -> f64 {
    let mut state = env.state_from([0.0, y0], [0.0, 0.0], 0);
    let mut total = 0.0;
    while !state.terminated {
        let vx = state.observation[1];
        let action = if vx < env.config.v_max { [1.0, 0.0] } else { [0.0, 0.0] };
        let out = env.step(&state, &action).expect("scripted controller stays valid");
        total += out.reward;
        state = out.state;
    }
    total
}
