//! Latent variables `z = [z_cont, z_disc]` and their uniform prior.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// One latent value, fixed for a whole episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Latent {
    pub cont: Vec<f64>,
    pub disc: Option<usize>,
}

impl Latent {
    pub fn new(cont: Vec<f64>, disc: Option<usize>) -> Self {
        Self { cont, disc }
    }

    pub fn continuous(cont: Vec<f64>) -> Self {
        Self { cont, disc: None }
    }

    pub fn discrete(class: usize) -> Self {
        Self {
            cont: Vec::new(),
            disc: Some(class),
        }
    }
}

/// Shape of the latent space. The prior is uniform on `[-1, 1]^cont_dim`
/// times uniform over `0..disc_k` (absent when `disc_k == 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentSpec {
    pub cont_dim: usize,
    pub disc_k: usize,
}

impl LatentSpec {
    pub fn new(cont_dim: usize, disc_k: usize) -> Result<Self> {
        if cont_dim == 0 && disc_k == 0 {
            return Err(Error::Config("latent space needs a continuous or discrete part".into()));
        }
        if disc_k == 1 {
            return Err(Error::Config("a discrete latent needs at least two classes".into()));
        }
        Ok(Self { cont_dim, disc_k })
    }

    /// Width of the encoded latent fed to networks: `z_cont` then one-hot `z_disc`.
    pub fn input_dim(&self) -> usize {
        self.cont_dim + self.disc_k
    }

    /// Posterior head width: means, log standard deviations, then class logits.
    pub fn posterior_output_dim(&self) -> usize {
        2 * self.cont_dim + self.disc_k
    }

    /// Entropy of the prior in nats (differential for the continuous part).
    pub fn entropy(&self) -> f64 {
        let disc = if self.disc_k > 0 { (self.disc_k as f64).ln() } else { 0.0 };
        self.cont_dim as f64 * 2f64.ln() + disc
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Latent {
        let cont = (0..self.cont_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let disc = (self.disc_k > 0).then(|| rng.random_range(0..self.disc_k));
        Latent { cont, disc }
    }

    pub fn validate(&self, z: &Latent) -> Result<()> {
        let disc_ok = match z.disc {
            Some(k) => k < self.disc_k,
            None => self.disc_k == 0,
        };
        if z.cont.len() != self.cont_dim || !disc_ok {
            return Err(Error::Dimension(format!("latent {z:?} does not match {self:?}")));
        }
        Ok(())
    }

    pub fn encode(&self, z: &Latent) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.input_dim());
        v.extend_from_slice(&z.cont);
        if self.disc_k > 0 {
            let class = z.disc.unwrap_or(0);
            v.extend((0..self.disc_k).map(|k| if k == class { 1.0 } else { 0.0 }));
        }
        v
    }

    pub fn encode_batch(&self, zs: &[Latent]) -> Matrix {
        let mut data = Vec::with_capacity(zs.len() * self.input_dim());
        for z in zs {
            data.extend(self.encode(z));
        }
        Matrix::from_vec(zs.len(), self.input_dim(), data).expect("encode width is fixed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn continuous_samples_stay_in_box() {
        let spec = LatentSpec::new(2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let z = spec.sample(&mut rng);
            assert_eq!(z.disc, None);
            assert!(z.cont.iter().all(|c| (-1.0..=1.0).contains(c)));
        }
    }

    #[test]
    fn discrete_classes_are_uniform() {
        let spec = LatentSpec::new(0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[spec.sample(&mut rng).disc.unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn prior_entropy() {
        assert!((LatentSpec::new(2, 0).unwrap().entropy() - 1.3863).abs() < 1e-4);
        let mixed = LatentSpec::new(1, 3).unwrap();
        assert!((mixed.entropy() - (2f64.ln() + 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn empty_space_rejected() {
        assert!(LatentSpec::new(0, 0).is_err());
    }

    #[test]
    fn encoding_appends_one_hot() {
        let spec = LatentSpec::new(1, 3).unwrap();
        assert_eq!(spec.encode(&Latent::new(vec![0.5], Some(2))), vec![0.5, 0.0, 0.0, 1.0]);
        assert!(spec.validate(&Latent::new(vec![0.5], Some(3))).is_err());
    }
}
