//! The four learned function approximators.
//!
//! Actor and critics feed the latent through a fully connected embedding
//! layer and concatenate the result with the state (and, for critics, the
//! action). The posterior reads `s ⊕ a` (or `s` alone for state-only
//! discriminators) and emits Gaussian means, log standard deviations and
//! class logits.

use rand::Rng;

use super::latent::{Latent, LatentSpec};
use crate::error::{Error, Result};
use crate::numerics::dist::{gaussian_log_prob_grad, logsumexp, softmax};
use crate::numerics::{Matrix, Mlp, MlpTape, OutputHead, LOG_STD_MAX, LOG_STD_MIN};

/// An MLP over `state ⊕ [action] ⊕ embed(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentMlp {
    embed: Mlp,
    body: Mlp,
    state_dim: usize,
    action_dim: usize,
}

#[derive(Clone, Debug)]
pub struct LatentTape {
    embed: MlpTape,
    body: MlpTape,
}

#[derive(Clone, Debug)]
pub struct InputGrads {
    pub state: Matrix,
    /// Present when the network takes an action input.
    pub action: Option<Matrix>,
}

impl LatentMlp {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        latent_dim: usize,
        embed_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        head: OutputHead,
        rng: &mut R,
    ) -> Result<Self> {
        let embed = Mlp::new(&[latent_dim, embed_dim], OutputHead::Linear, rng)?;
        let mut sizes = vec![state_dim + action_dim + embed_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(out_dim);
        let body = Mlp::new(&sizes, head, rng)?;
        Ok(Self {
            embed,
            body,
            state_dim,
            action_dim,
        })
    }

    pub fn from_parts(embed: Mlp, body: Mlp, state_dim: usize, action_dim: usize) -> Result<Self> {
        if body.input_dim() != state_dim + action_dim + embed.output_dim() {
            return Err(Error::Dimension("embedding and body widths do not chain".into()));
        }
        Ok(Self {
            embed,
            body,
            state_dim,
            action_dim,
        })
    }

    pub fn embed(&self) -> &Mlp {
        &self.embed
    }

    pub fn body(&self) -> &Mlp {
        &self.body
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn body_input(&self, s: &Matrix, a: Option<&Matrix>, e: &Matrix) -> Result<Matrix> {
        match (a, self.action_dim) {
            (None, 0) => Matrix::hcat(&[s, e]),
            (Some(a), d) if d > 0 && a.cols() == d => Matrix::hcat(&[s, a, e]),
            _ => Err(Error::Dimension(format!(
                "network expects an action input of width {}",
                self.action_dim
            ))),
        }
    }

    pub fn forward(&self, s: &Matrix, a: Option<&Matrix>, z: &Matrix) -> Result<(Matrix, LatentTape)> {
        let (e, embed) = self.embed.forward(z)?;
        let x = self.body_input(s, a, &e)?;
        let (out, body) = self.body.forward(&x)?;
        Ok((out, LatentTape { embed, body }))
    }

    pub fn predict(&self, s: &Matrix, a: Option<&Matrix>, z: &Matrix) -> Result<Matrix> {
        let e = self.embed.predict(z)?;
        self.body.predict(&self.body_input(s, a, &e)?)
    }

    /// Gradients in [`Self::tensors`] order plus gradients for the state and
    /// action inputs.
    pub fn backward(&self, tape: &LatentTape, out_grad: &Matrix) -> Result<(Vec<Matrix>, InputGrads)> {
        let (body_grads, dx) = self.body.backward(&tape.body, out_grad)?;
        let widths: Vec<usize> = if self.action_dim > 0 {
            vec![self.state_dim, self.action_dim, self.embed.output_dim()]
        } else {
            vec![self.state_dim, self.embed.output_dim()]
        };
        let mut parts = dx.split_cols(&widths)?;
        let de = parts.pop().expect("embedding block");
        let action = (self.action_dim > 0).then(|| parts.pop().expect("action block"));
        let state = parts.pop().expect("state block");
        let (mut grads, _) = self.embed.backward(&tape.embed, &de)?;
        grads.extend(body_grads);
        Ok((grads, InputGrads { state, action }))
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut t = self.embed.tensors();
        t.extend(self.body.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut t = self.embed.tensors_mut();
        t.extend(self.body.tensors_mut());
        t
    }

    pub fn num_params(&self) -> usize {
        self.embed.num_params() + self.body.num_params()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = self.embed.flat_params();
        v.extend(self.body.flat_params());
        v
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.embed.num_params();
        if flat.len() != self.num_params() {
            return Err(Error::Dimension("flat parameter length".into()));
        }
        self.embed.set_flat_params(&flat[..n])?;
        self.body.set_flat_params(&flat[n..])
    }

    pub fn soft_update(&mut self, online: &LatentMlp, tau: f64) -> Result<()> {
        self.embed.soft_update(&online.embed, tau)?;
        self.body.soft_update(&online.body, tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosteriorInput {
    StateAction,
    State,
}

/// Variational posterior `q_phi(z | s, a)` (or `q(z | s)`).
#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    net: Mlp,
    input: PosteriorInput,
    spec: LatentSpec,
    state_dim: usize,
    action_dim: usize,
}

/// Per-sample log-likelihoods and their gradients with respect to the raw
/// posterior outputs.
#[derive(Clone, Debug)]
pub struct LogLikelihood {
    pub log_q: Vec<f64>,
    pub d_out: Matrix,
}

impl Posterior {
    pub fn new<R: Rng + ?Sized>(
        spec: LatentSpec,
        input: PosteriorInput,
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let in_dim = match input {
            PosteriorInput::StateAction => state_dim + action_dim,
            PosteriorInput::State => state_dim,
        };
        let mut sizes = vec![in_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(spec.posterior_output_dim());
        Ok(Self {
            net: Mlp::new(&sizes, OutputHead::Linear, rng)?,
            input,
            spec,
            state_dim,
            action_dim,
        })
    }

    pub fn from_parts(net: Mlp, input: PosteriorInput, spec: LatentSpec, state_dim: usize, action_dim: usize) -> Result<Self> {
        let in_dim = match input {
            PosteriorInput::StateAction => state_dim + action_dim,
            PosteriorInput::State => state_dim,
        };
        if net.input_dim() != in_dim || net.output_dim() != spec.posterior_output_dim() {
            return Err(Error::Dimension("posterior network shape".into()));
        }
        Ok(Self {
            net,
            input,
            spec,
            state_dim,
            action_dim,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn input(&self) -> PosteriorInput {
        self.input
    }

    pub fn spec(&self) -> LatentSpec {
        self.spec
    }

    fn input_matrix(&self, s: &Matrix, a: &Matrix) -> Result<Matrix> {
        if s.cols() != self.state_dim {
            return Err(Error::Dimension("posterior state width".into()));
        }
        match self.input {
            PosteriorInput::StateAction => {
                if a.cols() != self.action_dim {
                    return Err(Error::Dimension("posterior action width".into()));
                }
                Matrix::hcat(&[s, a])
            }
            PosteriorInput::State => Ok(s.clone()),
        }
    }

    pub fn forward(&self, s: &Matrix, a: &Matrix) -> Result<(Matrix, MlpTape)> {
        self.net.forward(&self.input_matrix(s, a)?)
    }

    pub fn predict(&self, s: &Matrix, a: &Matrix) -> Result<Matrix> {
        self.net.predict(&self.input_matrix(s, a)?)
    }

    /// Returns parameter gradients and, for state-action posteriors, the
    /// gradient with respect to the action input.
    pub fn backward(&self, tape: &MlpTape, out_grad: &Matrix) -> Result<(Vec<Matrix>, Option<Matrix>)> {
        let (grads, dx) = self.net.backward(tape, out_grad)?;
        let da = match self.input {
            PosteriorInput::StateAction => {
                let mut parts = dx.split_cols(&[self.state_dim, self.action_dim])?;
                Some(parts.pop().expect("action block"))
            }
            PosteriorInput::State => None,
        };
        Ok((grads, da))
    }

    /// `log q(z|·)` per row of `out`, summing the factored Gaussian over
    /// `z_cont` and the categorical term over `z_disc`.
    pub fn log_likelihood(&self, out: &Matrix, zs: &[Latent]) -> Result<LogLikelihood> {
        let (c, k) = (self.spec.cont_dim, self.spec.disc_k);
        if out.rows() != zs.len() || out.cols() != self.spec.posterior_output_dim() {
            return Err(Error::Dimension("posterior output vs latent batch".into()));
        }
        let mut log_q = Vec::with_capacity(zs.len());
        let mut d_out = Matrix::zeros(out.rows(), out.cols());
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        for (r, z) in zs.iter().enumerate() {
            self.spec.validate(z)?;
            let row = out.row(r);
            let grad = d_out.row_mut(r);
            let mut lp = 0.0;
            for i in 0..c {
                let mean = row[i];
                let raw = row[c + i];
                let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                let diff = (z.cont[i] - mean) * (-log_std).exp();
                lp += -half_log_2pi - log_std - 0.5 * diff * diff;
                let (dm, dls) = gaussian_log_prob_grad(z.cont[i], mean, log_std);
                grad[i] = dm;
                grad[c + i] = if raw > LOG_STD_MIN && raw < LOG_STD_MAX { dls } else { 0.0 };
            }
            if k > 0 {
                let logits = &row[2 * c..];
                let class = z.disc.expect("validated");
                lp += logits[class] - logsumexp(logits);
                for (j, p) in softmax(logits).into_iter().enumerate() {
                    grad[2 * c + j] = if j == class { 1.0 - p } else { -p };
                }
            }
            if !lp.is_finite() {
                return Err(Error::Numeric("non-finite posterior log-probability".into()));
            }
            log_q.push(lp);
        }
        Ok(LogLikelihood { log_q, d_out })
    }

    /// Convenience: per-sample `log q(z | s, a)` without gradients.
    pub fn log_prob_batch(&self, s: &Matrix, a: &Matrix, zs: &[Latent]) -> Result<Vec<f64>> {
        let out = self.predict(s, a)?;
        Ok(self.log_likelihood(&out, zs)?.log_q)
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.net.tensors()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.net.tensors_mut()
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.net.flat_params()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        self.net.set_flat_params(flat)
    }
}

/// Actor, twin critics, their targets and the posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentNets {
    pub actor: LatentMlp,
    pub actor_target: LatentMlp,
    pub critic1: LatentMlp,
    pub critic2: LatentMlp,
    pub critic1_target: LatentMlp,
    pub critic2_target: LatentMlp,
    pub posterior: Posterior,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian_log_prob;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_q_is_gaussian_plus_categorical() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = LatentSpec::new(2, 3).unwrap();
        let post = Posterior::new(spec, PosteriorInput::StateAction, 3, 2, &[8], &mut rng).unwrap();
        let s = Matrix::from_rows(&[[0.1, -0.2, 0.3]]).unwrap();
        let a = Matrix::from_rows(&[[0.5, -0.5]]).unwrap();
        let z = Latent::new(vec![0.2, -0.7], Some(1));
        let out = post.predict(&s, &a).unwrap();
        let ll = post.log_likelihood(&out, std::slice::from_ref(&z)).unwrap();
        let row = out.row(0);
        let log_std: Vec<f64> = row[2..4].iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
        let gauss = gaussian_log_prob(&z.cont, &row[0..2], &log_std).unwrap();
        let cat = crate::numerics::categorical_log_prob(&row[4..], 1).unwrap();
        assert!((ll.log_q[0] - (gauss + cat)).abs() < 1e-12);
    }

    #[test]
    fn log_std_is_clamped() {
        let spec = LatentSpec::new(1, 0).unwrap();
        let net = Mlp::from_parts(
            vec![Matrix::zeros(2, 1)],
            vec![Matrix::column_vector(&[0.0, -50.0])],
            OutputHead::Linear,
        )
        .unwrap();
        let post = Posterior::from_parts(net, PosteriorInput::State, spec, 1, 1).unwrap();
        let out = post.predict(&Matrix::zeros(1, 1), &Matrix::zeros(1, 1)).unwrap();
        let ll = post.log_likelihood(&out, &[Latent::continuous(vec![0.0])]).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln() + 5.0;
        assert!((ll.log_q[0] - expected).abs() < 1e-12);
        assert_eq!(ll.d_out.get(0, 1), 0.0);
    }

    #[test]
    fn latent_mlp_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let critic = LatentMlp::new(3, 2, 2, 4, &[8, 8], 1, OutputHead::Linear, &mut rng).unwrap();
        let s = Matrix::zeros(5, 3);
        let a = Matrix::zeros(5, 2);
        let z = Matrix::zeros(5, 2);
        let (q, tape) = critic.forward(&s, Some(&a), &z).unwrap();
        assert_eq!(q.shape(), (5, 1));
        let (grads, inputs) = critic.backward(&tape, &Matrix::filled(5, 1, 1.0)).unwrap();
        assert_eq!(grads.len(), critic.tensors().len());
        assert_eq!(inputs.action.unwrap().shape(), (5, 2));
        assert_eq!(inputs.state.shape(), (5, 3));
        assert!(critic.forward(&s, None, &z).is_err());
    }
}
