//! Training loop: mini-batch weight updates alternating with topology
//! rewiring between epochs.

mod config;
mod history;
mod optimizer;
mod suite;

use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{OptimizerConfig, OptimizerKind, TrainConfig};
pub use history::{EpochRecord, LayerRewiring, TrainingHistory, HISTORY_FILE, TIMING_FILE, TOPOLOGY_FILE};
pub use optimizer::Optimizer;
pub use suite::{replica_seed, run_experiment_suite, run_suite_with, ReplicaOutcome, SuiteReport, SNAPSHOT_FILE};

use crate::dataset::{load_named, DatasetError, LabeledImageSet};
use crate::network::{forward, init_network, loss_and_grad, predict, snapshot, Network, NetworkError};
use crate::seed::{self, stream};
use crate::topology::{topology_update, TopologyError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("malformed history: {0}")]
    History(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Progress notifications passed to the observer of [`train_with`].
#[derive(Debug)]
pub enum Progress<'a> {
    Batch { epoch: usize, index: usize, loss: f64 },
    Epoch { record: &'a EpochRecord, network: &'a Network },
}

const EVAL_CHUNK: usize = 1000;

/// Fraction of samples whose highest logit is the true class. Ties go to the
/// lowest class index.
pub fn evaluate(net: &Network, set: &LabeledImageSet) -> Result<f64, TrainError> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let chunks: Vec<Vec<usize>> =
        (0..set.len()).collect::<Vec<_>>().chunks(EVAL_CHUNK).map(<[usize]>::to_vec).collect();
    let correct = chunks
        .par_iter()
        .map(|idx| -> Result<usize, NetworkError> {
            let logits = predict(net, &set.batch(idx))?;
            Ok(logits.rows().into_iter().zip(idx).filter(|(row, &i)| argmax(row.iter()) == set.label(i)).count())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(correct.iter().sum::<usize>() as f64 / set.len() as f64)
}

fn argmax<'a>(values: impl Iterator<Item = &'a f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, &v) in values.enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

/// Load the configured dataset and train on it.
pub fn train(config: &TrainConfig) -> Result<(Network, TrainingHistory), TrainError> {
    config.validate()?;
    let (train_set, test_set) = load_named(&config.dataset, &config.data_root)?;
    train_on(config, &train_set, &test_set)
}

pub fn train_on(
    config: &TrainConfig,
    train_set: &LabeledImageSet,
    test_set: &LabeledImageSet,
) -> Result<(Network, TrainingHistory), TrainError> {
    train_with(config, train_set, test_set, None, |_| ControlFlow::Continue(()))
}

/// The full training loop. Snapshots go to `checkpoint_dir` every
/// `config.checkpoint_every` epochs; the observer may stop training early.
pub fn train_with<F>(
    config: &TrainConfig,
    train_set: &LabeledImageSet,
    test_set: &LabeledImageSet,
    checkpoint_dir: Option<&Path>,
    mut observer: F,
) -> Result<(Network, TrainingHistory), TrainError>
where
    F: FnMut(Progress<'_>) -> ControlFlow<()>,
{
    config.validate()?;
    let train_set = match config.train_subset {
        Some(n) => train_set.head(n),
        None => train_set.clone(),
    };
    let test_set = match config.test_subset {
        Some(n) => test_set.head(n),
        None => test_set.clone(),
    };
    if train_set.class_count() != test_set.class_count() {
        return Err(TrainError::ConfigInvalid("train and test sets disagree on class count".into()));
    }
    let mut sizes = vec![train_set.image(0).len()];
    sizes.extend(&config.hidden);
    let mut net = init_network(&sizes, train_set.class_count(), config.density, config.seed)?;
    let mut opt = Optimizer::new(&config.optimizer, &net);
    let mut topology = config.topology;
    topology.seed = seed::derive(config.seed, stream::TOPOLOGY);
    let mut history = TrainingHistory::new(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        let mut rng = seed::rng(seed::derive_path(config.seed, &[stream::SHUFFLE, epoch as u64]));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut stop = false;
        for (index, idx) in order.chunks(config.batch_size).enumerate() {
            let (_, cache) = forward(&net, &train_set.batch(idx))?;
            let (loss, grads) = loss_and_grad(&net, &cache, &train_set.batch_labels(idx))?;
            opt.step(&mut net, &grads);
            loss_sum += loss * idx.len() as f64;
            stop |= observer(Progress::Batch { epoch, index, loss }).is_break();
        }
        let accuracy = evaluate(&net, &test_set)?;

        let mut record = EpochRecord {
            epoch,
            accuracy,
            loss: loss_sum / train_set.len() as f64,
            update_seconds: 0.0,
            edges: Vec::new(),
            rewiring: Vec::new(),
        };
        let last = epoch == config.epochs;
        if topology.due(epoch) && (!last || config.update_after_final_epoch) {
            let before = net.layers().to_vec();
            let t = Instant::now();
            let stats = topology_update(&mut net, &topology, epoch as u64)?;
            record.update_seconds = t.elapsed().as_secs_f64();
            for (l, old) in before.iter().enumerate() {
                opt.remap_layer(l, old, net.layer(l));
            }
            record.rewiring = stats
                .layers
                .iter()
                .map(|s| LayerRewiring { pruned: s.pruned, dangling_removed: s.dangling_removed, regrown: s.regrown })
                .collect();
        }
        record.edges = net.edge_counts();
        log::info!(
            "seed {} epoch {epoch}: accuracy {:.4}, loss {:.4}, update {:.3}s",
            config.seed,
            record.accuracy,
            record.loss,
            record.update_seconds
        );
        if let Some(dir) = checkpoint_dir {
            if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
                std::fs::create_dir_all(dir)?;
                snapshot::save(&net, &dir.join(format!("checkpoint_{epoch:05}.snap")))?;
            }
        }
        stop |= observer(Progress::Epoch { record: &record, network: &net }).is_break();
        history.epochs.push(record);
        if stop {
            break;
        }
    }
    Ok((net, history))
}
