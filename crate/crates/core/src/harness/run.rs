//! Training runs with periodic deterministic evaluation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::RunConfig;
use crate::agent::{encode_checkpoint, read_header, restore_checkpoint, stream_rng, Agent, CheckpointHeader, Latent, Stream, Trainer};
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::metrics::{agent_embedding, diversity_score, mi_lower_bound};
use crate::replay::Batch;

pub const METRICS_HEADER: &str = "step,ret_mean,ret_std,mi_bound,diversity,critic_loss,j_q,j_info,gate_frac";

/// One evaluation row of the metrics log. Values that do not apply to a
/// run (for example `gate_frac` outside gated mode) are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub ret_mean: f64,
    pub ret_std: f64,
    pub mi_bound: f64,
    pub diversity: f64,
    pub critic_loss: f64,
    pub j_q: f64,
    pub j_info: f64,
    pub gate_frac: f64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step, self.ret_mean, self.ret_std, self.mi_bound, self.diversity, self.critic_loss, self.j_q, self.j_info, self.gate_frac
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return Err(Error::Input(format!("metrics row has {} fields", f.len())));
        }
        let num = |i: usize| -> Result<f64> { f[i].parse().map_err(|_| Error::Input(format!("bad metrics field '{}'", f[i]))) };
        Ok(Self {
            step: f[0].parse().map_err(|_| Error::Input(format!("bad step '{}'", f[0])))?,
            ret_mean: num(1)?,
            ret_std: num(2)?,
            mi_bound: num(3)?,
            diversity: num(4)?,
            critic_loss: num(5)?,
            j_q: num(6)?,
            j_info: num(7)?,
            gate_frac: num(8)?,
        })
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Task return of one deterministic episode of `mu(., z)`.
pub fn episode_return<R: Rng + ?Sized>(agent: &Agent, z: &Latent, env: &Env, rng: &mut R) -> Result<f64> {
    let mut state = env.reset(rng);
    let mut total = 0.0;
    loop {
        let a = agent.policy(&state.observation, z)?;
        let out = env.step(&state, &a)?;
        total += out.reward;
        if out.done || out.state.terminated {
            return Ok(total);
        }
        state = out.state;
    }
}

/// Deterministic evaluation of a trained agent.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub ret_mean: f64,
    pub ret_std: f64,
    pub diversity: f64,
    pub embeddings: Vec<Vec<f64>>,
}

pub fn evaluate<R: Rng + ?Sized>(agent: &Agent, env: &Env, config: &RunConfig, rng: &mut R) -> Result<EvalStats> {
    let spec = agent.latent_spec();
    let mut returns = Vec::with_capacity(config.eval_episodes);
    for _ in 0..config.eval_episodes {
        let z = spec.sample(rng);
        returns.push(episode_return(agent, &z, env, rng)?);
    }
    let (ret_mean, ret_std) = mean_std(&returns);
    let mut embeddings = Vec::with_capacity(config.eval_latents);
    for _ in 0..config.eval_latents {
        let z = spec.sample(rng);
        embeddings.push(agent_embedding(agent, &z, env, config.embed_episodes, rng)?.mean_action);
    }
    Ok(EvalStats {
        ret_mean,
        ret_std,
        diversity: diversity_score(&embeddings, config.kernel_h)?,
        embeddings,
    })
}

#[derive(Default)]
struct Accumulator {
    critic: Vec<f64>,
    j_q: Vec<f64>,
    j_info: Vec<f64>,
    gates: Vec<f64>,
}

impl Accumulator {
    fn mean(xs: &[f64]) -> f64 {
        mean_std(xs).0
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// A training run in progress. Errors writing artifacts leave the in-memory
/// state intact, so the caller may retry after fixing the cause.
pub struct Run {
    config: RunConfig,
    hash: String,
    trainer: Trainer,
    eval_env: Env,
    eval_rng: ChaCha8Rng,
    acc: Accumulator,
    rows: Vec<MetricsRow>,
    out_dir: PathBuf,
}

impl Run {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let env = config.build_env()?;
        let agent = Agent::new(
            config.agent.clone(),
            env.spec().clone(),
            config.latent_spec()?,
            &mut stream_rng(config.seed, Stream::Init),
        )?;
        let r_star = config.reference_return();
        let trainer = Trainer::new(agent, env.clone(), config.seed, r_star)?;
        Ok(Self {
            hash: config.hash(),
            eval_rng: stream_rng(config.seed, Stream::Eval),
            out_dir: config.out_dir.clone(),
            config,
            trainer,
            eval_env: env,
            acc: Accumulator::default(),
            rows: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn trainer(&self) -> &Trainer {
        &self.trainer
    }

    pub fn agent(&self) -> &Agent {
        &self.trainer.agent
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.out_dir.join("metrics.csv")
    }

    pub fn checkpoint_path(&self, step: u64) -> PathBuf {
        self.out_dir.join("checkpoints").join(format!("step_{step:09}.ckpt"))
    }

    /// Creates the output directory and writes the manifest, the metrics
    /// header and the initial checkpoint.
    pub fn start(&mut self) -> Result<()> {
        let ckpt_dir = self.out_dir.join("checkpoints");
        fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
        let mut resolved = serde_json::Map::new();
        for key in RunConfig::keys().filter(|k| *k != "out_dir") {
            resolved.insert(key.to_string(), json!(self.config.get(key)?));
        }
        let manifest = json!({
            "config_hash": self.hash,
            "checkpoint_format_version": crate::agent::checkpoint::FORMAT_VERSION,
            "config": resolved,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Input(e.to_string()))?;
        write_file(&self.out_dir.join("manifest.json"), format!("{text}\n").as_bytes())?;
        write_file(&self.metrics_path(), format!("{METRICS_HEADER}\n").as_bytes())?;
        self.save_checkpoint()
    }

    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        encode_checkpoint(
            &self.trainer.agent,
            &self.hash,
            self.trainer.steps_done(),
            &self.config.canonical_text(),
        )
    }

    pub fn save_checkpoint(&self) -> Result<()> {
        write_file(&self.checkpoint_path(self.trainer.steps_done()), &self.checkpoint_bytes())
    }

    /// Evaluates now and appends a metrics row.
    pub fn evaluate_now(&mut self) -> Result<MetricsRow> {
        let agent = &self.trainer.agent;
        let stats = evaluate(agent, &self.eval_env, &self.config, &mut self.eval_rng)?;
        let recent = self.trainer.buffer.recent(self.config.mi_samples);
        let mi_bound = if recent.is_empty() {
            f64::NAN
        } else {
            let batch = Batch::from_transitions(&recent, self.trainer.buffer.dims());
            mi_lower_bound(&agent.nets.posterior, &batch.s, &batch.a, &batch.z, agent.latent_spec())?
        };
        let row = MetricsRow {
            step: self.trainer.steps_done(),
            ret_mean: stats.ret_mean,
            ret_std: stats.ret_std,
            mi_bound,
            diversity: stats.diversity,
            critic_loss: Accumulator::mean(&self.acc.critic),
            j_q: Accumulator::mean(&self.acc.j_q),
            j_info: Accumulator::mean(&self.acc.j_info),
            gate_frac: Accumulator::mean(&self.acc.gates),
        };
        self.acc = Accumulator::default();
        let path = self.metrics_path();
        let mut f = fs::OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        writeln!(f, "{}", row.to_csv()).map_err(|e| Error::io(&path, e))?;
        self.rows.push(row.clone());
        Ok(row)
    }

    /// Trains until `total_steps`, evaluating and checkpointing on schedule.
    pub fn run_to_end(&mut self) -> Result<()> {
        let total = self.config.agent.total_steps;
        while self.trainer.steps_done() < total {
            let d = self.trainer.train_step()?;
            self.acc.critic.extend(d.critic_loss);
            self.acc.j_q.extend(d.j_q);
            self.acc.j_info.extend(d.j_info);
            self.acc.gates.extend(d.gated_in.map(|g| if g { 1.0 } else { 0.0 }));
            let step = self.trainer.steps_done();
            if step % self.config.eval_interval == 0 || step == total {
                self.evaluate_now()?;
            }
            let ci = self.config.checkpoint_interval;
            if (ci > 0 && step % ci == 0) || step == total {
                self.save_checkpoint()?;
            }
        }
        Ok(())
    }
}

/// Artifacts of a finished run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub rows: Vec<MetricsRow>,
    pub final_checkpoint: PathBuf,
}

pub fn train_run(config: &RunConfig) -> Result<RunSummary> {
    let mut run = Run::new(config.clone())?;
    run.start()?;
    run.run_to_end()?;
    Ok(RunSummary {
        out_dir: run.out_dir.clone(),
        config_hash: run.hash.clone(),
        rows: run.rows.clone(),
        final_checkpoint: run.checkpoint_path(run.trainer.steps_done()),
    })
}

/// A checkpoint restored together with the configuration embedded in it.
pub struct LoadedCheckpoint {
    pub config: RunConfig,
    pub agent: Agent,
    pub header: CheckpointHeader,
}

/// Loads a checkpoint. The embedded configuration must hash to the stored
/// value, and to `expected_hash` when one is given, unless `force` is set.
pub fn load_checkpoint(path: &Path, expected_hash: Option<&str>, force: bool) -> Result<LoadedCheckpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = read_header(&bytes)?;
    let config = RunConfig::from_text(&header.config_text)?;
    let own = config.hash();
    if own != header.config_hash && !force {
        return Err(Error::Checkpoint(format!(
            "{}: embedded config hashes to {own}, header says {}",
            path.display(),
            header.config_hash
        )));
    }
    let expected = expected_hash.unwrap_or(&header.config_hash);
    let env = config.build_env()?;
    let mut agent = Agent::new(
        config.agent.clone(),
        env.spec().clone(),
        config.latent_spec()?,
        &mut stream_rng(config.seed, Stream::Init),
    )?;
    restore_checkpoint(&mut agent, &bytes, expected, force)?;
    Ok(LoadedCheckpoint { config, agent, header })
}
