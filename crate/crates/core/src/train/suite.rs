use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{train_on, TrainConfig, TrainError, TrainingHistory};
use crate::dataset::{load_named, LabeledImageSet};
use crate::network::{snapshot, Network};
use crate::seed::{self, stream};

pub const SNAPSHOT_FILE: &str = "network.snap";
const SUMMARY_FILE: &str = "suite.csv";

/// Seed of replica `r` of a suite with master seed `master`. Kept to 63
/// bits so that it fits a TOML integer in the saved config.
pub fn replica_seed(master: u64, r: usize) -> u64 {
    seed::derive_path(master, &[stream::REPLICA, r as u64]) >> 1
}

#[derive(Debug)]
pub struct ReplicaOutcome {
    pub name: String,
    pub replica: usize,
    pub seed: u64,
    pub dir: PathBuf,
    /// Final test accuracy, or the error that ended the run.
    pub result: Result<f64, String>,
}

#[derive(Debug, Default)]
pub struct SuiteReport {
    pub outcomes: Vec<ReplicaOutcome>,
}

impl SuiteReport {
    pub fn succeeded(&self) -> impl Iterator<Item = &ReplicaOutcome> {
        self.outcomes.iter().filter(|o| o.result.is_ok())
    }

    pub fn failed(&self) -> impl Iterator<Item = &ReplicaOutcome> {
        self.outcomes.iter().filter(|o| o.result.is_err())
    }
}

/// Train `replicas` independently seeded copies of every named config and
/// persist each run under `out/<name>/replica_XX/`. Failed runs are recorded
/// and do not stop their siblings.
pub fn run_experiment_suite(
    configs: &[(String, TrainConfig)],
    replicas: usize,
    out: &Path,
) -> Result<SuiteReport, TrainError> {
    run_suite_with(configs, replicas, out, train_on)
}

/// [`run_experiment_suite`] with a custom per-replica training function.
pub fn run_suite_with<F>(
    configs: &[(String, TrainConfig)],
    replicas: usize,
    out: &Path,
    run: F,
) -> Result<SuiteReport, TrainError>
where
    F: Fn(&TrainConfig, &LabeledImageSet, &LabeledImageSet) -> Result<(Network, TrainingHistory), TrainError> + Sync,
{
    for (name, config) in configs {
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(TrainError::ConfigInvalid(format!("bad run name {name:?}")));
        }
        config.validate()?;
    }
    let data: Vec<Result<(LabeledImageSet, LabeledImageSet), String>> =
        configs.iter().map(|(_, c)| load_named(&c.dataset, &c.data_root).map_err(|e| e.to_string())).collect();
    let jobs: Vec<(usize, usize)> = (0..configs.len()).flat_map(|c| (0..replicas).map(move |r| (c, r))).collect();
    let outcomes: Vec<ReplicaOutcome> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (name, base) = &configs[c];
            let mut config = base.clone();
            config.seed = replica_seed(base.seed, r);
            let dir = out.join(name).join(format!("replica_{r:02}"));
            let result = match &data[c] {
                Err(e) => Err(e.clone()),
                Ok((train_set, test_set)) => run(&config, train_set, test_set)
                    .and_then(|(net, history)| {
                        persist(&dir, &config, &net.with_seed_lineage(vec![base.seed, config.seed]), &history)?;
                        Ok(history.final_accuracy().unwrap_or(0.0))
                    })
                    .map_err(|e| e.to_string()),
            };
            if let Err(e) = &result {
                log::error!("{name} replica {r} failed: {e}");
            }
            ReplicaOutcome { name: name.clone(), replica: r, seed: config.seed, dir, result }
        })
        .collect();
    let report = SuiteReport { outcomes };
    for (name, _) in configs {
        write_summary(&out.join(name), report.outcomes.iter().filter(|o| &o.name == name))?;
    }
    Ok(report)
}

fn persist(dir: &Path, config: &TrainConfig, net: &Network, history: &TrainingHistory) -> Result<(), TrainError> {
    history.write_dir(dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml())?;
    snapshot::save(net, &dir.join(SNAPSHOT_FILE))?;
    Ok(())
}

fn write_summary<'a>(dir: &Path, outcomes: impl Iterator<Item = &'a ReplicaOutcome>) -> Result<(), TrainError> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(SUMMARY_FILE)).map_err(|e| TrainError::History(e.to_string()))?;
    let mut write = |row: [String; 5]| w.write_record(&row).map_err(|e| TrainError::History(e.to_string()));
    write(["replica", "seed", "status", "final_accuracy", "error"].map(String::from))?;
    for o in outcomes {
        let row = match &o.result {
            Ok(acc) => [o.replica.to_string(), o.seed.to_string(), "ok".into(), acc.to_string(), String::new()],
            Err(e) => [o.replica.to_string(), o.seed.to_string(), "failed".into(), String::new(), e.clone()],
        };
        write(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::testutil::write_synthetic;

    fn config(root: &Path) -> TrainConfig {
        TrainConfig {
            data_root: root.to_path_buf(),
            hidden: vec![20],
            density: 0.1,
            epochs: 1,
            batch_size: 8,
            seed: 99,
            ..Default::default()
        }
    }

    #[test]
    fn replica_seeds_are_distinct_and_reproducible() {
        let seeds: Vec<u64> = (0..10).map(|r| replica_seed(5, r)).collect();
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), 10);
        assert_eq!(seeds, (0..10).map(|r| replica_seed(5, r)).collect::<Vec<_>>());
    }

    #[test]
    fn persists_every_replica_and_isolates_failures() {
        let data = tempfile::tempdir().unwrap();
        write_synthetic(&data.path().join("mnist"), 40, 10, &[0, 1, 2]);
        let out = tempfile::tempdir().unwrap();
        let configs = vec![("small".to_string(), config(data.path()))];
        let bad = replica_seed(99, 3);
        let report = run_suite_with(&configs, 5, out.path(), |c, tr, te| {
            if c.seed == bad {
                return Err(TrainError::ConfigInvalid("injected".into()));
            }
            train_on(c, tr, te)
        })
        .unwrap();
        assert_eq!(report.succeeded().count(), 4);
        assert_eq!(report.failed().map(|o| o.replica).collect::<Vec<_>>(), vec![3]);
        for o in report.succeeded() {
            let h = TrainingHistory::read_dir(&o.dir).unwrap();
            assert_eq!(h.seed, o.seed);
            let net = snapshot::load(&o.dir.join(SNAPSHOT_FILE)).unwrap();
            assert_eq!(net.seed_lineage(), &[99, o.seed]);
        }
        assert!(!out.path().join("small/replica_03").exists());
        let summary = std::fs::read_to_string(out.path().join("small/suite.csv")).unwrap();
        assert_eq!(summary.lines().count(), 6);
        assert!(summary.contains("failed"));
    }

    #[test]
    fn missing_dataset_fails_every_replica_without_error() {
        let out = tempfile::tempdir().unwrap();
        let configs = vec![("nodata".to_string(), config(&out.path().join("absent")))];
        let report = run_experiment_suite(&configs, 2, out.path()).unwrap();
        assert_eq!(report.failed().count(), 2);
    }
}
