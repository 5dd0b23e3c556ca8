//! Per-epoch training records and their CSV form.
//!
//! A run directory holds three files: `history.csv` (seed, epoch, accuracy,
//! loss and per-layer edge counts; fully deterministic), `timing.csv`
//! (wall-clock duration of each topology update) and `topology.csv` (links
//! pruned, dropped by cleanup and regrown, per epoch and layer).

use std::path::Path;

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerRewiring {
    pub pruned: usize,
    pub dangling_removed: usize,
    pub regrown: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub accuracy: f64,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    /// Duration of the topology update following this epoch; 0 when none ran.
    pub update_seconds: f64,
    /// Edge counts per sparse layer at the end of the epoch, after rewiring.
    pub edges: Vec<usize>,
    /// Empty when no update ran.
    pub rewiring: Vec<LayerRewiring>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
}

pub const HISTORY_FILE: &str = "history.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const TOPOLOGY_FILE: &str = "topology.csv";

impl TrainingHistory {
    pub fn new(seed: u64) -> Self {
        Self { seed, epochs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.accuracy).collect()
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.accuracy)
    }

    /// First epoch whose accuracy is strictly above `threshold`.
    pub fn first_epoch_above(&self, threshold: f64) -> Option<usize> {
        self.epochs.iter().find(|e| e.accuracy > threshold).map(|e| e.epoch)
    }

    /// Mean update duration over epochs that had an update.
    pub fn mean_update_seconds(&self) -> Option<f64> {
        let t: Vec<f64> = self.epochs.iter().filter(|e| !e.rewiring.is_empty()).map(|e| e.update_seconds).collect();
        (!t.is_empty()).then(|| t.iter().sum::<f64>() / t.len() as f64)
    }

    fn layer_count(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.edges.len())
    }

    pub fn history_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["seed".to_string(), "epoch".into(), "accuracy".into(), "loss".into()];
        header.extend((1..=self.layer_count()).map(|l| format!("edges_l{l}")));
        w.write_record(&header).expect("in-memory write");
        for e in &self.epochs {
            let mut row = vec![self.seed.to_string(), e.epoch.to_string(), e.accuracy.to_string(), e.loss.to_string()];
            row.extend(e.edges.iter().map(|n| n.to_string()));
            w.write_record(&row).expect("in-memory write");
        }
        into_string(w)
    }

    pub fn timing_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "update_seconds"]).expect("in-memory write");
        for e in &self.epochs {
            w.write_record([e.epoch.to_string(), e.update_seconds.to_string()]).expect("in-memory write");
        }
        into_string(w)
    }

    pub fn topology_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "layer", "pruned", "dangling_removed", "regrown"]).expect("in-memory write");
        for e in &self.epochs {
            for (l, r) in e.rewiring.iter().enumerate() {
                let row = [e.epoch, l + 1, r.pruned, r.dangling_removed, r.regrown].map(|n| n.to_string());
                w.write_record(&row).expect("in-memory write");
            }
        }
        into_string(w)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), TrainError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(HISTORY_FILE), self.history_csv())?;
        std::fs::write(dir.join(TIMING_FILE), self.timing_csv())?;
        std::fs::write(dir.join(TOPOLOGY_FILE), self.topology_csv())?;
        Ok(())
    }

    /// Inverse of [`TrainingHistory::write_dir`]. `timing.csv` and
    /// `topology.csv` are optional.
    pub fn read_dir(dir: &Path) -> Result<Self, TrainError> {
        let mut history = Self::parse_history(&std::fs::read_to_string(dir.join(HISTORY_FILE))?)?;
        if let Ok(text) = std::fs::read_to_string(dir.join(TIMING_FILE)) {
            for row in rows(&text)? {
                let epoch: usize = field(&row, 0)?;
                let seconds: f64 = field(&row, 1)?;
                history.record_mut(epoch)?.update_seconds = seconds;
            }
        }
        if let Ok(text) = std::fs::read_to_string(dir.join(TOPOLOGY_FILE)) {
            for row in rows(&text)? {
                let epoch: usize = field(&row, 0)?;
                let layer: usize = field(&row, 1)?;
                let r = LayerRewiring {
                    pruned: field(&row, 2)?,
                    dangling_removed: field(&row, 3)?,
                    regrown: field(&row, 4)?,
                };
                let rec = history.record_mut(epoch)?;
                if layer != rec.rewiring.len() + 1 {
                    return Err(TrainError::History(format!("topology rows out of order at epoch {epoch}")));
                }
                rec.rewiring.push(r);
            }
        }
        Ok(history)
    }

    fn parse_history(text: &str) -> Result<Self, TrainError> {
        let mut history = Self::default();
        for (n, row) in rows(text)?.into_iter().enumerate() {
            if row.len() < 4 {
                return Err(TrainError::History(format!("history row {} has {} fields", n + 1, row.len())));
            }
            let seed: u64 = field(&row, 0)?;
            if n > 0 && seed != history.seed {
                return Err(TrainError::History("history mixes seeds".into()));
            }
            history.seed = seed;
            let edges = (4..row.len()).map(|k| field(&row, k)).collect::<Result<_, _>>()?;
            history.epochs.push(EpochRecord {
                epoch: field(&row, 1)?,
                accuracy: field(&row, 2)?,
                loss: field(&row, 3)?,
                update_seconds: 0.0,
                edges,
                rewiring: Vec::new(),
            });
        }
        Ok(history)
    }

    fn record_mut(&mut self, epoch: usize) -> Result<&mut EpochRecord, TrainError> {
        self.epochs
            .iter_mut()
            .find(|e| e.epoch == epoch)
            .ok_or_else(|| TrainError::History(format!("no history row for epoch {epoch}")))
    }
}

fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is utf-8")
}

fn rows(text: &str) -> Result<Vec<csv::StringRecord>, TrainError> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| TrainError::History(e.to_string()))
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, k: usize) -> Result<T, TrainError> {
    row.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| TrainError::History(format!("bad field {k} in row {:?}", row)))
}
