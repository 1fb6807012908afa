//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numeric failure
//! (including a failed gradient check), 1 anything else.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ltd3::agent::gradsuite::gradient_suite;
use ltd3::envs::{RingMdp, RingMdpConfig};
use ltd3::harness::{
    episode_return, expand_axes, fewshot_adapt, load_checkpoint, mean_std, sweep, train_run, FewShotConfig, LoadedCheckpoint, RunConfig,
};
use ltd3::metrics::{agent_embedding, diversity_score, mi_oracle, ring_joint, MiMode};
use ltd3::numerics::GradCheckConfig;
use ltd3::Error;

#[derive(Parser, Debug)]
#[command(name = "ltd3", version, about = "Latent-conditioned TD3: training, evaluation and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one run and write metrics, manifest and checkpoints.
    Train(TrainArgs),
    /// Deterministic returns of a checkpoint over a latent grid, as CSV.
    Eval(EvalArgs),
    /// Diversity score of a checkpoint over sampled latents.
    Diversity(DiversityArgs),
    /// Few-shot adaptation of a checkpoint on a test variant.
    Fewshot(FewshotArgs),
    /// Exact mutual information on the ring construction.
    MiOracle(MiOracleArgs),
    /// Finite-difference check of every learner objective.
    Gradcheck(GradcheckArgs),
    /// Train a grid of configurations and aggregate their curves.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable. Applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args, Debug)]
struct CheckpointArgs {
    /// Checkpoint file written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Load even if the configuration hash does not match.
    #[arg(long)]
    force: bool,
    /// Seed for latent sampling and environment resets.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    ckpt: CheckpointArgs,
    /// Number of latents to evaluate.
    #[arg(long, default_value_t = 8)]
    latents: usize,
    /// Episodes per latent.
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiversityArgs {
    #[command(flatten)]
    ckpt: CheckpointArgs,
    /// Number of latent-conditioned policies scored together.
    #[arg(long, default_value_t = 8)]
    latents: usize,
    /// Kernel length scale; defaults to the checkpoint's `kernel_h`.
    #[arg(long)]
    h: Option<f64>,
    /// Episodes per behaviour embedding.
    #[arg(long, default_value_t = 1)]
    episodes: usize,
}

#[derive(Args, Debug)]
struct FewshotArgs {
    #[command(flatten)]
    ckpt: CheckpointArgs,
    /// Candidate episodes on the test environment.
    #[arg(long, default_value_t = 8)]
    budget: usize,
    /// Evaluation episodes with the selected latent.
    #[arg(long, default_value_t = 5)]
    final_episodes: usize,
    /// Override a key of the checkpoint's config to build the test
    /// environment, e.g. `pv_variant=blocked`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the per-episode audit log here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleEnv {
    Ring,
}

#[derive(Args, Debug)]
struct MiOracleArgs {
    #[arg(long, value_enum, default_value = "ring")]
    env: OracleEnv,
    /// Ring size.
    #[arg(long, default_value_t = 4)]
    n_states: usize,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Maximum accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Axis as `key=v1,v2,...`; repeatable, combined as a grid.
    #[arg(long = "axis", value_name = "KEY=V1,V2")]
    axes: Vec<String>,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0,1,2,3,4")]
    seeds: String,
    /// Directory for the runs and the aggregate report.
    #[arg(long)]
    out: PathBuf,
}

fn split_kv(item: &str) -> Result<(&str, &str), Error> {
    item.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got '{item}'")))
}

fn resolve_config(args: &ConfigArgs) -> anyhow::Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for item in &args.set {
        let (k, v) = split_kv(item)?;
        config.set(k, v)?;
    }
    config.validate()?;
    Ok(config)
}

fn load(args: &CheckpointArgs) -> anyhow::Result<LoadedCheckpoint> {
    Ok(load_checkpoint(&args.checkpoint, None, args.force)?)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let config = resolve_config(&args.cfg)?;
    let summary = train_run(&config)?;
    println!("config hash {}", summary.config_hash);
    if let Some(last) = summary.rows.last() {
        println!(
            "step {}  return {:.4} ± {:.4}  mi_bound {:.4}  diversity {:.4}",
            last.step, last.ret_mean, last.ret_std, last.mi_bound, last.diversity
        );
    }
    println!("metrics {}", summary.out_dir.join("metrics.csv").display());
    println!("checkpoint {}", summary.final_checkpoint.display());
    Ok(())
}

fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let loaded = load(&args.ckpt)?;
    let env = loaded.config.build_env()?;
    let spec = loaded.agent.latent_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(args.ckpt.seed);
    let mut header = vec!["index".to_string()];
    header.extend((0..spec.cont_dim).map(|i| format!("z{i}")));
    if spec.disc_k > 0 {
        header.push("class".into());
    }
    header.extend(["ret_mean".into(), "ret_std".into()]);
    let mut text = header.join(",") + "\n";
    for i in 0..args.latents {
        let z = spec.sample(&mut rng);
        let rets = (0..args.episodes)
            .map(|_| episode_return(&loaded.agent, &z, &env, &mut rng))
            .collect::<Result<Vec<_>, _>>()?;
        let (m, s) = mean_std(&rets);
        let mut fields = vec![i.to_string()];
        fields.extend(z.cont.iter().map(|c| c.to_string()));
        if let Some(c) = z.disc {
            fields.push(c.to_string());
        }
        fields.extend([m.to_string(), s.to_string()]);
        text.push_str(&(fields.join(",") + "\n"));
    }
    emit(args.out.as_deref(), &text)
}

fn diversity(args: &DiversityArgs) -> anyhow::Result<()> {
    let loaded = load(&args.ckpt)?;
    let env = loaded.config.build_env()?;
    let h = args.h.unwrap_or(loaded.config.kernel_h);
    let spec = loaded.agent.latent_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(args.ckpt.seed);
    let mut embeddings = Vec::with_capacity(args.latents);
    for _ in 0..args.latents {
        let z = spec.sample(&mut rng);
        embeddings.push(agent_embedding(&loaded.agent, &z, &env, args.episodes, &mut rng)?.mean_action);
    }
    let score = diversity_score(&embeddings, h)?;
    for (i, e) in embeddings.iter().enumerate() {
        let coords: Vec<String> = e.iter().map(|x| format!("{x:.4}")).collect();
        println!("policy {i}: mean action [{}]", coords.join(", "));
    }
    println!("diversity={score:.4}  (M={}, h={h:.4})", args.latents);
    Ok(())
}

fn fewshot(args: &FewshotArgs) -> anyhow::Result<()> {
    let loaded = load(&args.ckpt)?;
    let mut test = loaded.config.clone();
    for item in &args.set {
        let (k, v) = split_kv(item)?;
        test.set(k, v)?;
    }
    let env = test.build_env()?;
    let fs_cfg = FewShotConfig {
        budget: args.budget,
        final_episodes: args.final_episodes,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.ckpt.seed);
    let report = fewshot_adapt(&loaded.agent, &fs_cfg, &env, &mut rng)?;
    if let Some(path) = &args.log {
        let text = format!("episode,phase,candidate,return\n{}\n", report.log.join("\n"));
        emit(Some(path), &text)?;
    }
    for (i, (z, r)) in report.candidates.iter().enumerate() {
        println!("candidate {i}: return {r:.4}  z={:?}", z);
    }
    println!(
        "selected candidate {}  adapted return {:.4} ± {:.4}  test episodes {}",
        report.best_index, report.mean, report.std, report.test_episodes
    );
    Ok(())
}

fn mi_oracle_cmd(args: &MiOracleArgs) -> anyhow::Result<()> {
    match args.env {
        OracleEnv::Ring => {
            let ring = RingMdp::new(RingMdpConfig {
                n_states: args.n_states,
                ..RingMdpConfig::default()
            })?;
            let joint = ring_joint(&ring)?;
            let s = mi_oracle(&joint, MiMode::StateLatent);
            let sa = mi_oracle(&joint, MiMode::StateActionLatent);
            println!("I(s;z)={s:.4}  I(s,a;z)={sa:.4}");
        }
    }
    Ok(())
}

fn gradcheck(args: &GradcheckArgs) -> anyhow::Result<()> {
    let config = GradCheckConfig {
        step: args.step,
        tolerance: args.tolerance,
        ..GradCheckConfig::default()
    };
    let checks = gradient_suite(args.seed, args.seeds, &config)?;
    let mut worst: Vec<(&str, f64)> = Vec::new();
    for c in &checks {
        let e = c.report.max_rel_error();
        match worst.iter_mut().find(|(n, _)| *n == c.loss) {
            Some((_, w)) => *w = w.max(e),
            None => worst.push((c.loss, e)),
        }
    }
    let mut ok = true;
    for (name, e) in &worst {
        let pass = *e < args.tolerance;
        ok &= pass;
        println!("{name:<12} max_rel_error={e:.4e}  {}", if pass { "ok" } else { "FAIL" });
    }
    println!("seeds {}..{}  tolerance {:.4e}", args.seed, args.seed + args.seeds, args.tolerance);
    if !ok {
        return Err(Error::Numeric("gradient check exceeded tolerance".into()).into());
    }
    Ok(())
}

fn sweep_cmd(args: &SweepArgs) -> anyhow::Result<()> {
    let base = resolve_config(&args.cfg)?;
    let mut axes = Vec::new();
    for item in &args.axes {
        let (k, v) = split_kv(item)?;
        axes.push((k.to_string(), v.split(',').map(|s| s.trim().to_string()).collect()));
    }
    let seeds = args
        .seeds
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<u64>().map_err(|_| Error::Config(format!("seeds: cannot parse '{s}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    let entries = if axes.is_empty() && seeds.is_empty() {
        Vec::new()
    } else {
        expand_axes(&base, &axes, &seeds, &args.out)?
    };
    let report = sweep(&entries, &args.out).context("writing sweep report")?;
    let failed = report
        .runs
        .iter()
        .filter(|(_, o)| matches!(o, ltd3::harness::RunOutcome::Failed(_)))
        .count();
    println!("{} runs, {failed} failed", report.runs.len());
    println!("aggregate {}", args.out.join("aggregate.csv").display());
    if failed > 0 && failed == report.runs.len() {
        bail!("every run failed");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Numeric(_)) => 3,
        Some(Error::Config(_) | Error::Input(_) | Error::Checkpoint(_)) => 2,
        _ => 1,
    }
}

fn command_with_key_listing() -> clap::Command {
    let listing = format!("Configuration keys and defaults:\n{}", RunConfig::defaults_listing());
    let mut cmd = Cli::command().after_help(listing.clone());
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        let text = listing.clone();
        cmd = cmd.mut_subcommand(name, move |s| s.after_help(text));
    }
    cmd
}

pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command_with_key_listing().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Diversity(a) => diversity(a),
        Command::Fewshot(a) => fewshot(a),
        Command::MiOracle(a) => mi_oracle_cmd(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Sweep(a) => sweep_cmd(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
