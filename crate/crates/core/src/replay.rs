//! Fixed-capacity FIFO replay buffer with uniform sampling.

use rand::Rng;

use crate::agent::Latent;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub s_next: Vec<f64>,
    pub r: f64,
    /// Environment-intrinsic termination only; horizon truncation is not `done`.
    pub done: bool,
    pub z: Latent,
}

/// Expected widths of every stored transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransitionDims {
    pub state: usize,
    pub action: usize,
    pub latent_cont: usize,
    pub latent_disc: usize,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    dims: TransitionDims,
    storage: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, dims: TransitionDims) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            dims,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn dims(&self) -> TransitionDims {
        self.dims
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        let d = self.dims;
        let disc_ok = match t.z.disc {
            Some(k) => k < d.latent_disc,
            None => d.latent_disc == 0,
        };
        if t.s.len() != d.state
            || t.s_next.len() != d.state
            || t.a.len() != d.action
            || t.z.cont.len() != d.latent_cont
            || !disc_ok
        {
            return Err(Error::Dimension(format!(
                "transition does not match buffer dims {d:?}"
            )));
        }
        if !t.r.is_finite() {
            return Err(Error::Numeric("non-finite reward".into()));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Transitions from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity { 0 } else { self.cursor };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    /// The `n` most recently inserted transitions, oldest first.
    pub fn recent(&self, n: usize) -> Vec<&Transition> {
        let skip = self.len().saturating_sub(n);
        self.iter_ordered().skip(skip).collect()
    }

    /// Indices drawn i.i.d. uniformly with replacement. A batch may exceed
    /// the number of stored transitions; only an empty buffer is an error.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::State(format!(
                "cannot sample {batch} transitions from an empty buffer"
            )));
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.storage.len())).collect())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.storage.get(index)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(batch, rng)?;
        let items: Vec<&Transition> = idx.iter().map(|&i| &self.storage[i]).collect();
        Ok(Batch::from_transitions(&items, self.dims))
    }
}

/// A mini-batch laid out as matrices, one row per transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub s: Matrix,
    pub a: Matrix,
    pub s_next: Matrix,
    pub r: Vec<f64>,
    pub done: Vec<bool>,
    pub z: Vec<Latent>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition], dims: TransitionDims) -> Self {
        let n = items.len();
        let mut s = Vec::with_capacity(n * dims.state);
        let mut s_next = Vec::with_capacity(n * dims.state);
        let mut a = Vec::with_capacity(n * dims.action);
        for t in items {
            s.extend_from_slice(&t.s);
            s_next.extend_from_slice(&t.s_next);
            a.extend_from_slice(&t.a);
        }
        Batch {
            s: Matrix::from_vec(n, dims.state, s).expect("validated on push"),
            a: Matrix::from_vec(n, dims.action, a).expect("validated on push"),
            s_next: Matrix::from_vec(n, dims.state, s_next).expect("validated on push"),
            r: items.iter().map(|t| t.r).collect(),
            done: items.iter().map(|t| t.done).collect(),
            z: items.iter().map(|t| t.z.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}
