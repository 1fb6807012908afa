//! Log-densities for the posterior heads, plus the softmax family.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Range the posterior's Gaussian log standard deviation is clamped to.
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Factored Gaussian log-density `sum_i log N(z_i; mean_i, exp(log_std_i)^2)`.
pub fn gaussian_log_prob(z: &[f64], mean: &[f64], log_std: &[f64]) -> Result<f64> {
    if z.len() != mean.len() || z.len() != log_std.len() {
        return Err(Error::Dimension(format!(
            "gaussian_log_prob lengths {}, {}, {}",
            z.len(),
            mean.len(),
            log_std.len()
        )));
    }
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    Ok(z.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&zi, &mi), &ls)| {
            let d = (zi - mi) * (-ls).exp();
            -half_log_2pi - ls - 0.5 * d * d
        })
        .sum())
}

/// Derivatives of one Gaussian coordinate's log-density with respect to the
/// mean and the log standard deviation.
pub fn gaussian_log_prob_grad(z: f64, mean: f64, log_std: f64) -> (f64, f64) {
    let inv_var = (-2.0 * log_std).exp();
    let diff = z - mean;
    (diff * inv_var, -1.0 + diff * diff * inv_var)
}

pub fn logsumexp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `logits[index] - logsumexp(logits)`.
pub fn categorical_log_prob(logits: &[f64], index: usize) -> Result<f64> {
    if index >= logits.len() {
        return Err(Error::Bounds {
            index,
            len: logits.len(),
        });
    }
    Ok(logits[index] - logsumexp(logits))
}
