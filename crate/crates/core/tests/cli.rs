//! End-to-end checks of the `ltd3` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ltd3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltd3")).args(args).output().expect("spawn ltd3")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &[&str] = &[
    "--set",
    "hidden_sizes=8",
    "--set",
    "batch=8",
    "--set",
    "pv_horizon=20",
    "--set",
    "eval_episodes=2",
    "--set",
    "eval_latents=3",
];

fn train_tiny(dir: &Path, steps: u64) -> Output {
    let out = format!("out_dir={}", dir.display());
    let total = format!("total_steps={steps}");
    let mut args = vec!["train", "--set", &out, "--set", &total, "--set", "warmup_steps=50", "--set", "eval_interval=100"];
    args.extend_from_slice(TINY);
    ltd3(&args)
}

#[test]
fn mi_oracle_prints_ring_values() {
    let o = ltd3(&["mi-oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("I(s;z)=0.0000"), "{text}");
    assert!(text.contains("I(s,a;z)=0.6931"), "{text}");
}

#[test]
fn zero_step_run_writes_header_and_initial_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let o = train_tiny(tmp.path(), 0);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
    assert!(metrics.starts_with("step,"));
    let ckpts: Vec<_> = fs::read_dir(tmp.path().join("checkpoints")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(ckpts, vec![std::ffi::OsString::from("step_000000000.ckpt")]);
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn checkpoint_commands_run_on_a_trained_agent() {
    let tmp = tempfile::tempdir().unwrap();
    let o = train_tiny(tmp.path(), 200);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3, "{metrics}");
    let ckpt = tmp.path().join("checkpoints/step_000000200.ckpt");
    let ckpt = ckpt.to_str().unwrap();

    let o = ltd3(&["eval", "--checkpoint", ckpt, "--latents", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "index,z0,z1,ret_mean,ret_std");
    assert_eq!(lines.len(), 4);

    let o = ltd3(&["diversity", "--checkpoint", ckpt, "--latents", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("diversity="));

    let log = tmp.path().join("fewshot.log");
    let o = ltd3(&[
        "fewshot",
        "--checkpoint",
        ckpt,
        "--budget",
        "3",
        "--final-episodes",
        "2",
        "--set",
        "pv_variant=blocked",
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("test episodes 5"));
    let logged = fs::read_to_string(&log).unwrap();
    assert_eq!(logged.lines().filter(|l| l.contains(",select,") || l.contains(",final,")).count(), 5);
}

#[test]
fn identical_invocations_give_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(train_tiny(a.path(), 300).status.success());
    assert!(train_tiny(b.path(), 300).status.success());
    for f in ["metrics.csv", "checkpoints/step_000000300.ckpt", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn tampered_checkpoint_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(train_tiny(tmp.path(), 0).status.success());
    let path = tmp.path().join("checkpoints/step_000000000.ckpt");
    let mut bytes = fs::read(&path).unwrap();
    let needle = b"batch = 8";
    let pos = bytes.windows(needle.len()).position(|w| w == needle).expect("config text in header");
    bytes[pos + needle.len() - 1] = b'9';
    fs::write(&path, &bytes).unwrap();
    let p = path.to_str().unwrap();
    let o = ltd3(&["eval", "--checkpoint", p, "--latents", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = ltd3(&["eval", "--checkpoint", p, "--latents", "1", "--force"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let o = ltd3(&["train", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/run.cfg"));

    let o = ltd3(&["train", "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_key"));

    let o = ltd3(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_lists_configuration_defaults() {
    let o = ltd3(&["train", "--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("d_info = 4"), "{text}");
    assert!(text.contains("c_clip = 0.3"), "{text}");
}

#[test]
fn gradcheck_passes_on_a_few_seeds() {
    let o = ltd3(&["gradcheck", "--seeds", "3"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn sweep_writes_aggregate_and_isolates_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    fs::write(tmp.path().join("batch_16"), b"not a directory").unwrap();
    let args = [
        "sweep",
        "--axis",
        "batch=8,16",
        "--seeds",
        "0,1",
        "--out",
        out,
        "--set",
        "total_steps=100",
        "--set",
        "warmup_steps=50",
        "--set",
        "eval_interval=100",
        "--set",
        "hidden_sizes=8",
        "--set",
        "pv_horizon=20",
        "--set",
        "eval_episodes=1",
        "--set",
        "eval_latents=2",
    ];
    let o = ltd3(&args);
    let agg = fs::read_to_string(tmp.path().join("aggregate.csv")).unwrap();
    let lines: Vec<&str> = agg.lines().collect();
    assert_eq!(lines[0], "label,step,seeds,ret_mean,ret_mean_sd,mi_bound,diversity,diversity_sd");
    assert!(lines.iter().any(|l| l.starts_with("batch=8,100,2,")), "{agg}");
    assert!(!lines.iter().any(|l| l.starts_with("batch=16,")), "{agg}");
    let runs = fs::read_to_string(tmp.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().filter(|l| l.contains("failed")).count(), 2, "{runs}");
    assert!(o.status.success(), "{}", stderr(&o));
}
