//! Small environments with many optimal policies.
//!
//! Environments hold only their configuration. State lives in [`EnvState`]
//! and every transition is a pure function of `(config, state, action)`;
//! randomness enters only through the `rng` handed to [`Env::reset`].

mod pointvel;
mod ring;

pub use pointvel::{scripted_controller_return, PointVel, PointVelConfig, PointVelVariant};
pub use ring::{RingAction, RingMdp, RingMdpConfig};

use rand::Rng;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub horizon: usize,
    pub discrete_actions: Option<usize>,
    /// Integration step in seconds, continuous environments only.
    pub dt: Option<f64>,
}

impl EnvSpec {
    pub fn clip_action(&self, action: &mut [f64]) {
        for ((a, lo), hi) in action.iter_mut().zip(&self.action_low).zip(&self.action_high) {
            *a = a.clamp(*lo, *hi);
        }
    }

    pub fn action_range(&self) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(l, h)| h - l)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Physical {
    Ring { index: usize },
    Point { pos: [f64; 2], vel: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub time_step: usize,
    pub terminated: bool,
    pub(crate) physical: Physical,
}

impl EnvState {
    /// Current ring index, if this is a ring state.
    pub fn ring_index(&self) -> Option<usize> {
        match self.physical {
            Physical::Ring { index } => Some(index),
            _ => None,
        }
    }

    /// Position and velocity, if this is a point-mass state.
    pub fn point(&self) -> Option<([f64; 2], [f64; 2])> {
        match self.physical {
            Physical::Point { pos, vel } => Some((pos, vel)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    /// Termination intrinsic to the environment. Horizon truncation is
    /// reported through `state.terminated` only.
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Env {
    Ring(RingMdp),
    PointVel(PointVel),
}

impl Env {
    pub fn spec(&self) -> &EnvSpec {
        match self {
            Env::Ring(e) => e.spec(),
            Env::PointVel(e) => e.spec(),
        }
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        match self {
            Env::Ring(e) => e.reset(rng),
            Env::PointVel(e) => e.reset(rng),
        }
    }

    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepOutcome> {
        match self {
            Env::Ring(e) => e.step(state, action),
            Env::PointVel(e) => e.step(state, action),
        }
    }
}
