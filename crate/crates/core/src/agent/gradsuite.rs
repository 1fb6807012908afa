//! Finite-difference verification of every learner objective on random
//! networks and batches.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::latent::{Latent, LatentSpec};
use super::losses::{actor_q_objective, critic_loss, info_objective};
use super::nets::{LatentMlp, Posterior, PosteriorInput};
use crate::error::Result;
use crate::numerics::{check_gradients, GradCheckConfig, GradCheckReport, Matrix, OutputHead};

#[derive(Clone, Debug)]
pub struct LossCheck {
    pub loss: &'static str,
    pub seed: u64,
    pub report: GradCheckReport,
}

const STATE: usize = 3;
const ACTION: usize = 2;
const BATCH: usize = 5;

fn flatten(grads: &[Matrix]) -> Vec<f64> {
    grads.iter().flat_map(|g| g.as_slice().iter().copied()).collect()
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

struct Fixture {
    actor: LatentMlp,
    critic: LatentMlp,
    posterior: Posterior,
    s: Matrix,
    a: Matrix,
    zs: Vec<Latent>,
    z: Matrix,
    y: Vec<f64>,
    w: Vec<f64>,
}

fn fixture(seed: u64) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = LatentSpec::new(2, 3)?;
    let hidden = [7, 6];
    let head = OutputHead::action_box(&[-1.0; ACTION], &[1.0; ACTION]);
    let actor = LatentMlp::new(STATE, 0, spec.input_dim(), 3, &hidden, ACTION, head, &mut rng)?;
    let critic = LatentMlp::new(STATE, ACTION, spec.input_dim(), 3, &hidden, 1, OutputHead::Linear, &mut rng)?;
    let posterior = Posterior::new(spec, PosteriorInput::StateAction, STATE, ACTION, &hidden, &mut rng)?;
    let zs: Vec<Latent> = (0..BATCH).map(|_| spec.sample(&mut rng)).collect();
    Ok(Fixture {
        s: uniform(&mut rng, BATCH, STATE, 1.0),
        a: uniform(&mut rng, BATCH, ACTION, 1.0),
        z: spec.encode_batch(&zs),
        zs,
        y: (0..BATCH).map(|_| rng.random_range(-2.0..2.0)).collect(),
        w: (0..BATCH).map(|_| rng.random_range(0.7..1.3)).collect(),
        actor,
        critic,
        posterior,
    })
}

fn block(name: &str, range: Range<usize>) -> (String, Range<usize>) {
    (name.to_string(), range)
}

/// Checks the critic loss, `J_Q` and `J_info` for one seed.
pub fn check_all_losses(seed: u64, config: &GradCheckConfig) -> Result<Vec<LossCheck>> {
    let f = fixture(seed)?;
    let mut out = Vec::with_capacity(3);

    let (_, g) = critic_loss(&f.critic, &f.s, &f.a, &f.z, &f.y)?;
    let params = f.critic.flat_params();
    let mut probe = f.critic.clone();
    let report = check_gradients(
        |p| {
            probe.set_flat_params(p).expect("same length");
            critic_loss(&probe, &f.s, &f.a, &f.z, &f.y).expect("finite").0
        },
        &params,
        &flatten(&g),
        &[block("critic", 0..params.len())],
        config,
    );
    out.push(LossCheck {
        loss: "critic_loss",
        seed,
        report,
    });

    let (_, g) = actor_q_objective(&f.actor, &f.critic, &f.s, &f.z)?;
    let params = f.actor.flat_params();
    let mut probe = f.actor.clone();
    let report = check_gradients(
        |p| {
            probe.set_flat_params(p).expect("same length");
            actor_q_objective(&probe, &f.critic, &f.s, &f.z).expect("finite").0
        },
        &params,
        &flatten(&g),
        &[block("actor", 0..params.len())],
        config,
    );
    out.push(LossCheck {
        loss: "j_q",
        seed,
        report,
    });

    let info = info_objective(&f.actor, &f.posterior, &f.s, &f.zs, &f.z, &f.w, 1.0)?;
    let n_actor = f.actor.num_params();
    let mut params = f.actor.flat_params();
    params.extend(f.posterior.flat_params());
    let mut analytic = flatten(&info.actor_grads);
    analytic.extend(flatten(&info.posterior_grads));
    let (mut actor, mut posterior) = (f.actor.clone(), f.posterior.clone());
    let report = check_gradients(
        |p| {
            actor.set_flat_params(&p[..n_actor]).expect("same length");
            posterior.set_flat_params(&p[n_actor..]).expect("same length");
            info_objective(&actor, &posterior, &f.s, &f.zs, &f.z, &f.w, 1.0)
                .expect("finite")
                .value
        },
        &params,
        &analytic,
        &[block("actor", 0..n_actor), block("posterior", n_actor..params.len())],
        config,
    );
    out.push(LossCheck {
        loss: "j_info",
        seed,
        report,
    });
    Ok(out)
}

/// Runs [`check_all_losses`] for seeds `first..first + count`.
pub fn gradient_suite(first: u64, count: u64, config: &GradCheckConfig) -> Result<Vec<LossCheck>> {
    let mut all = Vec::new();
    for seed in first..first + count {
        all.extend(check_all_losses(seed, config)?);
    }
    Ok(all)
}
