//! Sequential sweeps over configuration axes with an aggregate report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::config::RunConfig;
use super::run::{mean_std, train_run, MetricsRow};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SweepEntry {
    /// Axis assignment shared by all seeds of one group, e.g. `c_clip=0.1`.
    pub label: String,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub enum RunOutcome {
    Finished(Vec<MetricsRow>),
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub runs: Vec<(SweepEntry, RunOutcome)>,
    /// Rows of the aggregate CSV, without the header.
    pub aggregate: Vec<String>,
}

pub const AGGREGATE_HEADER: &str = "label,step,seeds,ret_mean,ret_mean_sd,mi_bound,diversity,diversity_sd";

/// Cartesian product of the axes, times the seeds. Each run writes to
/// `out_dir/<label>/seed<seed>`.
pub fn expand_axes(base: &RunConfig, axes: &[(String, Vec<String>)], seeds: &[u64], out_dir: &Path) -> Result<Vec<SweepEntry>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in axes {
        if values.is_empty() {
            return Err(Error::Config(format!("{key}: axis has no values")));
        }
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    let mut entries = Vec::new();
    for combo in combos {
        let label = if combo.is_empty() {
            "base".to_string()
        } else {
            combo.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
        };
        let dir_name = label.replace([';', '='], "_");
        for &seed in seeds {
            let mut config = base.clone();
            for (k, v) in &combo {
                config.set(k, v)?;
            }
            config.seed = seed;
            config.out_dir = out_dir.join(&dir_name).join(format!("seed{seed}"));
            config.validate()?;
            entries.push(SweepEntry {
                label: label.clone(),
                config,
            });
        }
    }
    Ok(entries)
}

/// Per-label mean over seeds at every logged step.
pub fn aggregate(runs: &[(SweepEntry, RunOutcome)]) -> Vec<String> {
    let mut groups: BTreeMap<(&str, u64), Vec<&MetricsRow>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (entry, outcome) in runs {
        if let RunOutcome::Finished(rows) = outcome {
            if !order.contains(&entry.label.as_str()) {
                order.push(&entry.label);
            }
            for row in rows {
                groups.entry((&entry.label, row.step)).or_default().push(row);
            }
        }
    }
    let mut lines = Vec::new();
    for label in order {
        for ((l, step), rows) in groups.range((label, 0)..=(label, u64::MAX)) {
            debug_assert_eq!(*l, label);
            let rets: Vec<f64> = rows.iter().map(|r| r.ret_mean).collect();
            let divs: Vec<f64> = rows.iter().map(|r| r.diversity).collect();
            let mis: Vec<f64> = rows.iter().map(|r| r.mi_bound).collect();
            let (rm, rs) = mean_std(&rets);
            let (dm, ds) = mean_std(&divs);
            lines.push(format!("{label},{step},{},{rm},{rs},{},{dm},{ds}", rows.len(), mean_std(&mis).0));
        }
    }
    lines
}

/// Runs every entry in order. A failing run is recorded and the sweep
/// continues. Writes `aggregate.csv` and `runs.csv` under `out_dir`.
pub fn sweep(entries: &[SweepEntry], out_dir: &Path) -> Result<SweepReport> {
    let mut runs = Vec::with_capacity(entries.len());
    for entry in entries {
        let outcome = match train_run(&entry.config) {
            Ok(summary) => RunOutcome::Finished(summary.rows),
            Err(e) => {
                log::warn!("run {} seed {} failed: {e}", entry.label, entry.config.seed);
                RunOutcome::Failed(e.to_string())
            }
        };
        runs.push((entry.clone(), outcome));
    }
    let aggregate_rows = aggregate(&runs);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut text = format!("{AGGREGATE_HEADER}\n");
    for line in &aggregate_rows {
        text.push_str(line);
        text.push('\n');
    }
    let path = out_dir.join("aggregate.csv");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let mut status = String::from("label,seed,status,message\n");
    for (entry, outcome) in &runs {
        let (s, m) = match outcome {
            RunOutcome::Finished(_) => ("ok", String::new()),
            RunOutcome::Failed(msg) => ("failed", msg.replace([',', '\n'], " ")),
        };
        status.push_str(&format!("{},{},{s},{m}\n", entry.label, entry.config.seed));
    }
    let path = out_dir.join("runs.csv");
    fs::write(&path, status).map_err(|e| Error::io(&path, e))?;
    Ok(SweepReport {
        runs,
        aggregate: aggregate_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_is_cartesian() {
        let dir = tempfile::tempdir().unwrap();
        let axes = vec![
            ("c_clip".to_string(), vec!["0.1".into(), "0.3".into(), "1".into()]),
            ("d_info".to_string(), vec!["1".into(), "4".into()]),
        ];
        let e = expand_axes(&RunConfig::default(), &axes, &[0, 1, 2, 3, 4], dir.path()).unwrap();
        assert_eq!(e.len(), 30);
        assert_eq!(e[0].label, "c_clip=0.1;d_info=1");
        assert_eq!(e[0].config.agent.c_clip, 0.1);
        assert_eq!(e[4].config.seed, 4);
    }

    #[test]
    fn empty_sweep_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let r = sweep(&[], dir.path()).unwrap();
        assert!(r.runs.is_empty());
        let text = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
        assert_eq!(text, format!("{AGGREGATE_HEADER}\n"));
    }

    #[test]
    fn failures_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let mut base = RunConfig::default();
        base.apply_text("env = ring\nlatent_cont = 0\nlatent_disc = 2\nhidden_sizes = 4\nbatch = 4\nwarmup_steps = 8\ntotal_steps = 16\neval_interval = 8\neval_episodes = 1\neval_latents = 2\nbuffer_capacity = 64").unwrap();
        let mut entries = expand_axes(&base, &[], &[0, 1], dir.path()).unwrap();
        // Point the second run's output at a path that cannot be a directory.
        let blocker = dir.path().join("blocker");
        fs::write(&blocker, b"x").unwrap();
        entries[1].config.out_dir = blocker.join("sub");
        let r = sweep(&entries, dir.path()).unwrap();
        assert!(matches!(r.runs[0].1, RunOutcome::Finished(_)));
        assert!(matches!(r.runs[1].1, RunOutcome::Failed(_)));
        assert_eq!(r.aggregate.len(), 2);
        assert!(r.aggregate[0].starts_with("base,8,1,"));
    }
}
