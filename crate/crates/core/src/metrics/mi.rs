//! Exact mutual information over finite joints and the variational bound.

use crate::agent::{Latent, LatentSpec, Posterior};
use crate::envs::{RingAction, RingMdp};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A table `p(s, a, z)` over finite supports, stored with `z` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    n_s: usize,
    n_a: usize,
    n_z: usize,
    p: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MiMode {
    /// `I(s; z)`
    StateLatent,
    /// `I(s, a; z)`
    StateActionLatent,
}

impl JointDistribution {
    pub fn new(n_s: usize, n_a: usize, n_z: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != n_s * n_a * n_z || p.is_empty() {
            return Err(Error::Input(format!(
                "joint table has {} entries, expected {}x{}x{}",
                p.len(),
                n_s,
                n_a,
                n_z
            )));
        }
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Input("joint entries must be finite and non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Input(format!("joint sums to {total}, not 1")));
        }
        Ok(Self { n_s, n_a, n_z, p })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_s, self.n_a, self.n_z)
    }

    pub fn get(&self, s: usize, a: usize, z: usize) -> f64 {
        self.p[(s * self.n_a + a) * self.n_z + z]
    }

    pub fn marginal_z(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_z];
        for (i, p) in self.p.iter().enumerate() {
            m[i % self.n_z] += p;
        }
        m
    }

    /// `p(x, z)` where `x` is `s` or the pair `(s, a)` flattened.
    fn grouped(&self, mode: MiMode) -> (usize, Vec<f64>) {
        match mode {
            MiMode::StateActionLatent => (self.n_s * self.n_a, self.p.clone()),
            MiMode::StateLatent => {
                let mut g = vec![0.0; self.n_s * self.n_z];
                for s in 0..self.n_s {
                    for a in 0..self.n_a {
                        for z in 0..self.n_z {
                            g[s * self.n_z + z] += self.get(s, a, z);
                        }
                    }
                }
                (self.n_s, g)
            }
        }
    }
}

/// Exact `I(s;z)` or `I(s,a;z)` in nats, with `0 log 0 = 0`.
pub fn mi_oracle(joint: &JointDistribution, mode: MiMode) -> f64 {
    let (n_x, pxz) = joint.grouped(mode);
    let n_z = joint.n_z;
    let pz = joint.marginal_z();
    let mut mi = 0.0;
    for x in 0..n_x {
        let row = &pxz[x * n_z..(x + 1) * n_z];
        let px: f64 = row.iter().sum();
        for (z, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (px * pz[z])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Stationary joint of the ring under the two constant policies, with the
/// policy index as a uniformly distributed latent.
///
/// Action 0 is clockwise, action 1 counter-clockwise; latent 0 selects the
/// clockwise policy. Constant rotations are periodic, so the state marginal
/// is the Cesàro average of the chain started from the reset distribution.
pub fn ring_joint(ring: &RingMdp) -> Result<JointDistribution> {
    let n = ring.config().n_states;
    let policies = [RingAction::Clockwise, RingAction::CounterClockwise];
    let mut p = vec![0.0; n * 2 * 2];
    for (z, &action) in policies.iter().enumerate() {
        let mut dist = vec![1.0 / n as f64; n];
        let mut avg = vec![0.0; n];
        for _ in 0..n {
            for (acc, d) in avg.iter_mut().zip(&dist) {
                *acc += d / n as f64;
            }
            let mut next = vec![0.0; n];
            for (s, d) in dist.iter().enumerate() {
                next[ring.transition(s, action).0] += d;
            }
            dist = next;
        }
        for (s, mass) in avg.iter().enumerate() {
            p[(s * 2 + action.index()) * 2 + z] += 0.5 * mass;
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    JointDistribution::new(n, 2, 2, p)
}

/// `mean log q(z | s, a) + H(z)`, the variational lower bound on the
/// mutual information, over a dataset of rows.
pub fn mi_lower_bound(posterior: &Posterior, s: &Matrix, a: &Matrix, zs: &[Latent], spec: LatentSpec) -> Result<f64> {
    if zs.is_empty() {
        return Err(Error::Input("lower bound needs at least one sample".into()));
    }
    let log_q = posterior.log_prob_batch(s, a, zs)?;
    Ok(log_q.iter().sum::<f64>() / log_q.len() as f64 + spec.entropy())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::RingMdpConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn entropy(p: &[f64]) -> f64 {
        -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
    }

    #[test]
    fn ring_counterexample() {
        let ring = RingMdp::new(RingMdpConfig::default()).unwrap();
        let joint = ring_joint(&ring).unwrap();
        assert!(mi_oracle(&joint, MiMode::StateLatent).abs() < 1e-12);
        assert!((mi_oracle(&joint, MiMode::StateActionLatent) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn independence_gives_zero() {
        let ps = [0.2, 0.3, 0.5];
        let pa = [0.6, 0.4];
        let pz = [0.1, 0.9];
        let mut p = Vec::new();
        for s in ps {
            for a in pa {
                for z in pz {
                    p.push(s * a * z);
                }
            }
        }
        let j = JointDistribution::new(3, 2, 2, p).unwrap();
        assert!(mi_oracle(&j, MiMode::StateLatent).abs() < 1e-12);
        assert!(mi_oracle(&j, MiMode::StateActionLatent).abs() < 1e-12);
    }

    #[test]
    fn deterministic_latent_recovers_entropy() {
        // z = s for three states, a irrelevant.
        let mut p = vec![0.0; 3 * 2 * 3];
        let ps = [0.5, 0.3, 0.2];
        for s in 0..3 {
            for a in 0..2 {
                p[(s * 2 + a) * 3 + s] = ps[s] / 2.0;
            }
        }
        let j = JointDistribution::new(3, 2, 3, p).unwrap();
        assert!((mi_oracle(&j, MiMode::StateLatent) - entropy(&ps)).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_rejected() {
        assert!(matches!(JointDistribution::new(1, 1, 2, vec![0.5, 0.6]), Err(Error::Input(_))));
        assert!(JointDistribution::new(1, 1, 2, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn bounds_on_random_joints() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (ns, na, nz) = (rng.random_range(1..5), rng.random_range(1..4), rng.random_range(2..5));
            let mut p: Vec<f64> = (0..ns * na * nz).map(|_| rng.random::<f64>().powi(3)).collect();
            let t: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= t);
            let j = JointDistribution::new(ns, na, nz, p.clone()).unwrap();
            let sa = mi_oracle(&j, MiMode::StateActionLatent);
            let s = mi_oracle(&j, MiMode::StateLatent);
            let hz = entropy(&j.marginal_z());
            assert!(s >= 0.0 && s <= sa + 1e-12 && sa <= hz + 1e-12);
            // Relabeling z leaves the value unchanged.
            let mut q = p.clone();
            for chunk in q.chunks_mut(nz) {
                chunk.reverse();
            }
            let jr = JointDistribution::new(ns, na, nz, q).unwrap();
            assert!((mi_oracle(&jr, MiMode::StateActionLatent) - sa).abs() < 1e-12);
        }
    }
}
