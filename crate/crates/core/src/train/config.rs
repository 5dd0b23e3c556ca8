use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::dataset::DatasetName;
use crate::topology::TopologyUpdateConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    /// Stochastic gradient descent with heavy-ball momentum.
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Only used by [`OptimizerKind::Sgd`].
    pub momentum: f64,
    /// L2 penalty added to the gradient of every parameter.
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            momentum: 0.9,
            weight_decay: 0.0,
        }
    }
}

/// Everything that determines a training run.
///
/// The `seed` field drives initialization, shuffling and rewiring; the seed
/// inside `topology` is ignored and replaced by one derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: String,
    pub data_root: PathBuf,
    pub hidden: Vec<usize>,
    pub density: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub topology: TopologyUpdateConfig,
    pub seed: u64,
    /// Save a snapshot every this many epochs (0 = never).
    pub checkpoint_every: usize,
    /// Rewire after the last epoch too, so the returned network is the
    /// freshly rewired one rather than the one that was evaluated.
    pub update_after_final_epoch: bool,
    /// Train on the first `n` training samples only.
    pub train_subset: Option<usize>,
    /// Evaluate on the first `n` test samples only.
    pub test_subset: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dataset: "mnist".into(),
            data_root: PathBuf::from("data"),
            hidden: vec![1000, 1000, 1000],
            density: 0.01,
            epochs: 50,
            batch_size: 128,
            optimizer: OptimizerConfig::default(),
            topology: TopologyUpdateConfig::default(),
            seed: 0,
            checkpoint_every: 0,
            update_after_final_epoch: false,
            train_subset: None,
            test_subset: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let config: Self = toml::from_str(text).map_err(|e| TrainError::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Read a config file. A relative `data_root` is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_toml(&text)?;
        if config.data_root.is_relative() {
            if let Some(dir) = path.parent() {
                config.data_root = dir.join(&config.data_root);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let invalid = |m: String| Err(TrainError::ConfigInvalid(m));
        if self.dataset.parse::<DatasetName>().is_err() {
            return invalid(format!("unknown dataset {:?}", self.dataset));
        }
        if self.epochs == 0 {
            return invalid("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return invalid("batch size must be at least 1".into());
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return invalid(format!("density {} outside (0, 1]", self.density));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return invalid("hidden layer sizes must be non-empty and positive".into());
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0) || !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return invalid("optimizer settings out of range".into());
        }
        if !(0.0..1.0).contains(&o.momentum) || o.epsilon <= 0.0 || o.weight_decay < 0.0 {
            return invalid("optimizer settings out of range".into());
        }
        if self.topology.interval > 0 {
            self.topology.validate().map_err(|e| TrainError::ConfigInvalid(e.to_string()))?;
        }
        if self.seed > i64::MAX as u64 || self.topology.seed > i64::MAX as u64 {
            return invalid("seeds must fit in 63 bits".into());
        }
        if self.train_subset == Some(0) || self.test_subset == Some(0) {
            return invalid("subsets must be non-empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Regrowth;

    #[test]
    fn toml_round_trip() {
        let mut c = TrainConfig::default();
        c.topology.strategy = Regrowth::Rlr;
        c.optimizer.kind = OptimizerKind::Sgd;
        c.train_subset = Some(100);
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = TrainConfig::from_toml("epochs = 3\n[topology]\nstrategy = \"rlr\"\n").unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.batch_size, 128);
        assert_eq!(c.topology.strategy, Regrowth::Rlr);
        assert_eq!(c.topology.prune_fraction, 0.3);
    }

    #[test]
    fn rejects_invalid() {
        for text in [
            "epochs = 0",
            "batch_size = 0",
            "density = 0.0",
            "density = 1.5",
            "dataset = \"cifar10\"",
            "bogus = 1",
            "seed = -1",
        ] {
            assert!(matches!(TrainConfig::from_toml(text), Err(TrainError::ConfigInvalid(_))), "{text}");
        }
    }
}
