//! Labelled `(s, a, z)` datasets and maximum-likelihood posterior fitting,
//! used to check how tight the variational bound can get.

use rand::Rng;

use crate::agent::losses::posterior_log_likelihood;
use crate::agent::{Latent, Posterior};
use crate::envs::{RingAction, RingMdp};
use crate::error::{Error, Result};
use crate::numerics::{AdamState, Matrix};

/// Rows of states, actions and the latent that generated them.
#[derive(Clone, Debug)]
pub struct LabeledData {
    pub s: Matrix,
    pub a: Matrix,
    pub z: Vec<Latent>,
}

impl LabeledData {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    fn select(&self, idx: &[usize]) -> Result<LabeledData> {
        let s: Vec<&[f64]> = idx.iter().map(|&i| self.s.row(i)).collect();
        let a: Vec<&[f64]> = idx.iter().map(|&i| self.a.row(i)).collect();
        Ok(LabeledData {
            s: Matrix::from_rows(&s)?,
            a: Matrix::from_rows(&a)?,
            z: idx.iter().map(|&i| self.z[i].clone()).collect(),
        })
    }
}

/// Full-horizon episodes of the two constant ring policies, each episode
/// drawing its latent class uniformly. Class 0 steps clockwise.
pub fn ring_dataset<R: Rng + ?Sized>(ring: &RingMdp, episodes: usize, rng: &mut R) -> Result<LabeledData> {
    if episodes == 0 {
        return Err(Error::Input("ring dataset needs at least one episode".into()));
    }
    let mut s = Vec::new();
    let mut a = Vec::new();
    let mut z = Vec::new();
    for _ in 0..episodes {
        let class = rng.random_range(0..2usize);
        let action = if class == 0 { RingAction::Clockwise } else { RingAction::CounterClockwise };
        let mut state = ring.reset(rng);
        while !state.terminated {
            let act = [action.encode()];
            s.push(state.observation.clone());
            a.push(act.to_vec());
            z.push(Latent::discrete(class));
            state = ring.step(&state, &act)?.state;
        }
    }
    Ok(LabeledData {
        s: Matrix::from_rows(&s)?,
        a: Matrix::from_rows(&a)?,
        z,
    })
}

/// Adam ascent on the mean log-likelihood over uniformly drawn minibatches.
/// Returns the full-data mean log-likelihood after the last step.
pub fn fit_posterior<R: Rng + ?Sized>(
    posterior: &mut Posterior,
    data: &LabeledData,
    steps: usize,
    batch: usize,
    lr: f64,
    rng: &mut R,
) -> Result<f64> {
    if data.is_empty() || batch == 0 {
        return Err(Error::Input("posterior fit needs data and a positive batch".into()));
    }
    let mut adam = AdamState::new(&posterior.tensors(), lr);
    for _ in 0..steps {
        let idx: Vec<usize> = (0..batch).map(|_| rng.random_range(0..data.len())).collect();
        let mb = data.select(&idx)?;
        let (_, grads) = posterior_log_likelihood(posterior, &mb.s, &mb.a, &mb.z)?;
        adam.step(&mut posterior.tensors_mut(), &grads, true)?;
    }
    let (value, _) = posterior_log_likelihood(posterior, &data.s, &data.a, &data.z)?;
    Ok(value)
}
