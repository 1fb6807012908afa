//! Library-level runs through training, checkpoint files and few-shot
//! adaptation.

use ltd3::agent::{encode_checkpoint, stream_rng, Stream};
use ltd3::harness::{fewshot_adapt, load_checkpoint, train_run, FewShotConfig, MetricsRow, RunConfig, VariantKind};

fn tiny(dir: &std::path::Path, mode: &str) -> RunConfig {
    let mut c = RunConfig::default();
    for (k, v) in [
        ("baseline_mode", mode),
        ("hidden_sizes", "8,8"),
        ("batch", "8"),
        ("pv_horizon", "25"),
        ("warmup_steps", "100"),
        ("total_steps", "400"),
        ("eval_interval", "200"),
        ("eval_episodes", "2"),
        ("eval_latents", "3"),
        ("checkpoint_interval", "200"),
    ] {
        c.set(k, v).unwrap();
    }
    c.out_dir = dir.to_path_buf();
    c
}

#[test]
fn checkpoint_file_round_trips_through_the_loader() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = train_run(&tiny(tmp.path(), "ltd3")).unwrap();
    let bytes = std::fs::read(&summary.final_checkpoint).unwrap();
    let loaded = load_checkpoint(&summary.final_checkpoint, Some(&summary.config_hash), false).unwrap();
    assert_eq!(loaded.header.step, 400);
    let again = encode_checkpoint(&loaded.agent, &loaded.header.config_hash, loaded.header.step, &loaded.header.config_text);
    assert_eq!(again, bytes);
    assert!(load_checkpoint(&summary.final_checkpoint, Some("0000"), false).is_err());
    assert!(load_checkpoint(&summary.final_checkpoint, Some("0000"), true).is_ok());
}

#[test]
fn metrics_file_matches_returned_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = train_run(&tiny(tmp.path(), "td3_diayn_sa")).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    let parsed: Vec<MetricsRow> = text.lines().skip(1).map(|l| MetricsRow::from_csv(l).unwrap()).collect();
    assert_eq!(parsed.len(), 2);
    for (a, b) in parsed.iter().zip(&summary.rows) {
        assert_eq!(a.to_csv(), b.to_csv());
    }
    let steps: Vec<u64> = parsed.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![200, 400]);
    let ckpts = std::fs::read_dir(tmp.path().join("checkpoints")).unwrap().count();
    assert_eq!(ckpts, 3);
}

#[test]
fn fewshot_on_a_trained_checkpoint_uses_exact_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = train_run(&tiny(tmp.path(), "ltd3")).unwrap();
    let loaded = load_checkpoint(&summary.final_checkpoint, None, false).unwrap();
    let mut test_cfg = loaded.config.clone();
    test_cfg.pv_variant = VariantKind::Blocked;
    let env = test_cfg.build_env().unwrap();
    let fs = FewShotConfig { budget: 8, final_episodes: 5 };
    let r = fewshot_adapt(&loaded.agent, &fs, &env, &mut stream_rng(0, Stream::FewShot)).unwrap();
    assert_eq!(r.test_episodes, 13);
    assert_eq!(r.log.len(), 13);
    assert_eq!(r.candidates.len(), 8);
    let best = r.candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.candidates[r.best_index].1, best);
}
