//! Fixed-architecture multilayer perceptrons with a hand-written backward pass.
//!
//! Hidden layers use ReLU. The output head is either linear or a tanh scaled
//! into an axis-aligned box, which is how actors keep actions in range.

use rand::Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum OutputHead {
    Linear,
    /// `offset + scale * tanh(x)`, elementwise per output unit.
    ScaledTanh { offset: Vec<f64>, scale: Vec<f64> },
}

impl OutputHead {
    /// Tanh head mapping onto `[low, high]`.
    pub fn action_box(low: &[f64], high: &[f64]) -> Self {
        OutputHead::ScaledTanh {
            offset: low.iter().zip(high).map(|(l, h)| 0.5 * (l + h)).collect(),
            scale: low.iter().zip(high).map(|(l, h)| 0.5 * (h - l)).collect(),
        }
    }
}

/// Parameters of one MLP. `weights[i]` is `sizes[i+1] x sizes[i]` and
/// `biases[i]` is a `sizes[i+1] x 1` column.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Matrix>,
    head: OutputHead,
}

/// Intermediates cached by [`Mlp::forward`] for the matching backward pass.
#[derive(Clone, Debug)]
pub struct MlpTape {
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl MlpTape {
    pub fn batch(&self) -> usize {
        self.input.rows()
    }

    pub fn output(&self) -> &Matrix {
        self.post.last().expect("tape has at least one layer")
    }
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], head: OutputHead, rng: &mut R) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Dimension(format!(
                "invalid layer sizes {layer_sizes:?}"
            )));
        }
        let out_dim = *layer_sizes.last().unwrap();
        if let OutputHead::ScaledTanh { offset, scale } = &head {
            if offset.len() != out_dim || scale.len() != out_dim {
                return Err(Error::Dimension(format!(
                    "tanh head of width {} on {out_dim} outputs",
                    offset.len()
                )));
            }
        }
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let b: Vec<f64> = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, w)?);
            biases.push(Matrix::column_vector(&b));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            head,
        })
    }

    /// Builds a network from explicit parameters, validating every shape.
    pub fn from_parts(weights: Vec<Matrix>, biases: Vec<Matrix>, head: OutputHead) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Dimension("weights and biases must pair up".into()));
        }
        let mut sizes = vec![weights[0].cols()];
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.cols() != sizes[i] || b.shape() != (w.rows(), 1) {
                return Err(Error::Dimension(format!("layer {i} shapes do not chain")));
            }
            sizes.push(w.rows());
        }
        let mut net = Self {
            layer_sizes: sizes,
            weights,
            biases,
            head: OutputHead::Linear,
        };
        if let OutputHead::ScaledTanh { offset, .. } = &head {
            if offset.len() != net.output_dim() {
                return Err(Error::Dimension("tanh head width".into()));
            }
        }
        net.head = head;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn head(&self) -> &OutputHead {
        &self.head
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Matrix] {
        &self.biases
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|p| p[1] * (p[0] + 1))
            .sum()
    }

    /// Parameter tensors in the canonical order `w0, b0, w1, b1, ...`.
    pub fn tensors(&self) -> Vec<&Matrix> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, MlpTape)> {
        self.check_input(input)?;
        let n = self.num_layers();
        let mut pre = Vec::with_capacity(n);
        let mut post: Vec<Matrix> = Vec::with_capacity(n);
        for i in 0..n {
            let x = if i == 0 { input } else { &post[i - 1] };
            let z = self.affine(i, x)?;
            let a = self.activate(i, &z);
            pre.push(z);
            post.push(a);
        }
        let out = post[n - 1].clone();
        Ok((
            out,
            MlpTape {
                input: input.clone(),
                pre,
                post,
            },
        ))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut x = self.activate(0, &self.affine(0, input)?);
        for i in 1..self.num_layers() {
            x = self.activate(i, &self.affine(i, &x)?);
        }
        Ok(x)
    }

    /// Returns parameter gradients (canonical tensor order) and the gradient
    /// with respect to the input.
    pub fn backward(&self, tape: &MlpTape, output_grad: &Matrix) -> Result<(Vec<Matrix>, Matrix)> {
        let n = self.num_layers();
        if tape.pre.len() != n || tape.input.cols() != self.input_dim() {
            return Err(Error::State("tape was not produced by this network".into()));
        }
        for (i, z) in tape.pre.iter().enumerate() {
            if z.cols() != self.layer_sizes[i + 1] {
                return Err(Error::State(format!("tape layer {i} has the wrong width")));
            }
        }
        if output_grad.shape() != tape.output().shape() {
            return Err(Error::Dimension(format!(
                "output gradient {:?} vs output {:?}",
                output_grad.shape(),
                tape.output().shape()
            )));
        }
        let mut grads: Vec<Matrix> = Vec::with_capacity(2 * n);
        let mut delta = output_grad.clone();
        for i in (0..n).rev() {
            self.activation_backward(i, &tape.pre[i], &mut delta);
            let x = if i == 0 { &tape.input } else { &tape.post[i - 1] };
            let dw = delta.matmul_tn(x)?;
            let db = delta.column_sums();
            let dx = delta.matmul(&self.weights[i])?;
            grads.push(db);
            grads.push(dw);
            delta = dx;
        }
        grads.reverse();
        Ok((grads, delta))
    }

    /// Polyak averaging `self <- (1 - tau) self + tau online`.
    pub fn soft_update(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if self.layer_sizes != online.layer_sizes {
            return Err(Error::Dimension("soft update between different architectures".into()));
        }
        for (t, o) in self.tensors_mut().into_iter().zip(online.tensors()) {
            for (a, b) in t.as_mut_slice().iter_mut().zip(o.as_slice()) {
                *a = (1.0 - tau) * *a + tau * b;
            }
        }
        Ok(())
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|t| t.as_slice().iter().copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.as_mut_slice().copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} columns, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn affine(&self, layer: usize, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul_nt(&self.weights[layer])?;
        let b = self.biases[layer].as_slice();
        for r in 0..z.rows() {
            for (v, bi) in z.row_mut(r).iter_mut().zip(b) {
                *v += bi;
            }
        }
        Ok(z)
    }

    fn activate(&self, layer: usize, z: &Matrix) -> Matrix {
        if layer + 1 < self.num_layers() {
            return z.map(|v| v.max(0.0));
        }
        match &self.head {
            OutputHead::Linear => z.clone(),
            OutputHead::ScaledTanh { offset, scale } => {
                let mut out = z.clone();
                for r in 0..out.rows() {
                    for ((v, o), s) in out.row_mut(r).iter_mut().zip(offset).zip(scale) {
                        *v = o + s * v.tanh();
                    }
                }
                out
            }
        }
    }

    fn activation_backward(&self, layer: usize, z: &Matrix, delta: &mut Matrix) {
        if layer + 1 < self.num_layers() {
            for (d, &v) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
            return;
        }
        if let OutputHead::ScaledTanh { scale, .. } = &self.head {
            for r in 0..delta.rows() {
                for ((d, &v), s) in delta.row_mut(r).iter_mut().zip(z.row(r)).zip(scale) {
                    let t = v.tanh();
                    *d *= s * (1.0 - t * t);
                }
            }
        }
    }
}
