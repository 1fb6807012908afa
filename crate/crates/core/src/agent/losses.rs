//! Objectives with their analytic gradients.
//!
//! Each function returns the objective value and gradients in the parameter
//! order of the networks involved. Maximized objectives return ascent
//! gradients; the critic loss returns a descent gradient.

use super::latent::Latent;
use super::nets::{LatentMlp, Posterior};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn column(values: &[f64]) -> Matrix {
    Matrix::column_vector(values)
}

/// Mean squared error `mean (Q(s,a,z) - y)^2` for one critic.
pub fn critic_loss(critic: &LatentMlp, s: &Matrix, a: &Matrix, z: &Matrix, y: &[f64]) -> Result<(f64, Vec<Matrix>)> {
    let (q, tape) = critic.forward(s, Some(a), z)?;
    if y.len() != q.rows() {
        return Err(Error::Dimension("target count does not match batch".into()));
    }
    let b = y.len() as f64;
    let mut loss = 0.0;
    let mut dq = Vec::with_capacity(y.len());
    for (qi, yi) in q.as_slice().iter().zip(y) {
        let diff = qi - yi;
        loss += diff * diff;
        dq.push(2.0 * diff / b);
    }
    loss /= b;
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite critic loss".into()));
    }
    let (grads, _) = critic.backward(&tape, &column(&dq))?;
    Ok((loss, grads))
}

/// `J_Q = mean Q1(s, mu(s,z), z)` and its gradient with respect to the actor.
pub fn actor_q_objective(actor: &LatentMlp, critic: &LatentMlp, s: &Matrix, z: &Matrix) -> Result<(f64, Vec<Matrix>)> {
    let (a, actor_tape) = actor.forward(s, None, z)?;
    let (q, critic_tape) = critic.forward(s, Some(&a), z)?;
    let b = q.rows() as f64;
    let value = q.sum() / b;
    let (_, inputs) = critic.backward(&critic_tape, &Matrix::filled(q.rows(), 1, 1.0 / b))?;
    let da = inputs.action.expect("critics take actions");
    let (grads, _) = actor.backward(&actor_tape, &da)?;
    Ok((value, grads))
}

/// Importance-weighted information objective
/// `alpha * mean(w * log q(z | s, mu(s,z)))`.
#[derive(Clone, Debug)]
pub struct InfoObjective {
    pub value: f64,
    pub actor_grads: Vec<Matrix>,
    pub posterior_grads: Vec<Matrix>,
}

#[allow(clippy::too_many_arguments)]
pub fn info_objective(
    actor: &LatentMlp,
    posterior: &Posterior,
    s: &Matrix,
    zs: &[Latent],
    z_enc: &Matrix,
    weights: &[f64],
    alpha: f64,
) -> Result<InfoObjective> {
    if weights.len() != s.rows() || zs.len() != s.rows() {
        return Err(Error::Dimension("importance weights do not match batch".into()));
    }
    let (a, actor_tape) = actor.forward(s, None, z_enc)?;
    let (out, post_tape) = posterior.forward(s, &a)?;
    let ll = posterior.log_likelihood(&out, zs)?;
    let b = s.rows() as f64;
    let mut value = 0.0;
    let mut d_out = ll.d_out;
    for (r, (lq, w)) in ll.log_q.iter().zip(weights).enumerate() {
        value += w * lq;
        let coef = alpha * w / b;
        d_out.row_mut(r).iter_mut().for_each(|g| *g *= coef);
    }
    value *= alpha / b;
    let (posterior_grads, da) = posterior.backward(&post_tape, &d_out)?;
    let actor_grads = match da {
        Some(da) => actor.backward(&actor_tape, &da)?.0,
        None => actor.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect(),
    };
    Ok(InfoObjective {
        value,
        actor_grads,
        posterior_grads,
    })
}

/// Mean log-likelihood `mean log q(z | s, a)` on stored pairs, for
/// maximum-likelihood discriminator training.
pub fn posterior_log_likelihood(posterior: &Posterior, s: &Matrix, a: &Matrix, zs: &[Latent]) -> Result<(f64, Vec<Matrix>)> {
    let (out, tape) = posterior.forward(s, a)?;
    let ll = posterior.log_likelihood(&out, zs)?;
    let b = zs.len() as f64;
    let mut d_out = ll.d_out;
    d_out.scale(1.0 / b);
    let (grads, _) = posterior.backward(&tape, &d_out)?;
    Ok((ll.log_q.iter().sum::<f64>() / b, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::latent::LatentSpec;
    use crate::agent::nets::PosteriorInput;
    use crate::numerics::OutputHead;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn critic_loss_is_zero_at_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let critic = LatentMlp::new(2, 1, 1, 2, &[4], 1, OutputHead::Linear, &mut rng).unwrap();
        let s = Matrix::from_rows(&[[0.1, 0.2], [0.3, -0.4]]).unwrap();
        let a = Matrix::from_rows(&[[0.5], [-0.5]]).unwrap();
        let z = Matrix::from_rows(&[[1.0], [-1.0]]).unwrap();
        let y = critic.predict(&s, Some(&a), &z).unwrap().into_vec();
        let (loss, grads) = critic_loss(&critic, &s, &a, &z, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| g.max_abs() == 0.0));
    }

    #[test]
    fn zero_weights_give_zero_info_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = LatentSpec::new(1, 2).unwrap();
        let actor = LatentMlp::new(2, 0, spec.input_dim(), 2, &[4], 1, OutputHead::action_box(&[-1.0], &[1.0]), &mut rng).unwrap();
        let post = Posterior::new(spec, PosteriorInput::StateAction, 2, 1, &[4], &mut rng).unwrap();
        let zs = vec![Latent::new(vec![0.3], Some(0)), Latent::new(vec![-0.3], Some(1))];
        let s = Matrix::from_rows(&[[0.1, 0.2], [0.3, -0.4]]).unwrap();
        let info = info_objective(&actor, &post, &s, &zs, &spec.encode_batch(&zs), &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(info.value, 0.0);
        assert!(info.actor_grads.iter().chain(&info.posterior_grads).all(|g| g.max_abs() == 0.0));
    }

    #[test]
    fn analytic_quadratic_critic_pulls_actor_to_zero() {
        // Q(s, a, z) = -a^2 substituted for the critic: dJ/da = -2a / B.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut actor = LatentMlp::new(2, 0, 1, 2, &[8], 1, OutputHead::action_box(&[-1.0], &[1.0]), &mut rng).unwrap();
        let s = Matrix::from_rows(&[[0.5, -0.2], [0.1, 0.9], [-0.7, 0.3]]).unwrap();
        let z = Matrix::from_rows(&[[0.2], [-0.6], [1.0]]).unwrap();
        let mut adam = crate::numerics::AdamState::new(&actor.tensors(), 1e-2);
        let start = actor.predict(&s, None, &z).unwrap().max_abs();
        for _ in 0..2000 {
            let (a, tape) = actor.forward(&s, None, &z).unwrap();
            let da = a.map(|x| -2.0 * x / 3.0);
            let (g, _) = actor.backward(&tape, &da).unwrap();
            adam.step(&mut actor.tensors_mut(), &g, true).unwrap();
        }
        let end = actor.predict(&s, None, &z).unwrap().max_abs();
        assert!(end < 1e-2 && end < start);
    }
}
