//! Between-epoch rewiring of the sparse layers: magnitude pruning, optional
//! removal of disconnected neurons, then regrowth of as many links as were
//! removed, layer by layer.

mod dangling;
mod prune;
mod regrow;
pub mod scoring;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Network, NetworkError};
use crate::seed;

pub use dangling::{find_disconnected, remove_disconnected, Disconnected};
pub use prune::{fraction_of, magnitude_ranking, prune_weakest, remove_by_magnitude, MagnitudeOrder};
pub use regrow::{regrow, Regrowth};
pub use scoring::{score_all, score_ch3l3, score_l3_count, CandidateScore, Scorer};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("layer has no links")]
    EmptyLayer,
    #[error("fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("invalid topology config: {0}")]
    InvalidConfig(String),
    #[error("candidate {input}→{output} is an existing link")]
    CandidateIsEdge { input: usize, output: usize },
    #[error("candidate {input}→{output} is out of range")]
    CandidateOutOfRange { input: usize, output: usize },
    #[error("cannot grow {requested} links, only {available} non-edges")]
    NotEnoughNonEdges { requested: usize, available: usize },
    #[error("unknown regrowth strategy `{0}`")]
    UnknownStrategy(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyUpdateConfig {
    /// Fraction ζ of links pruned per layer and update.
    pub prune_fraction: f64,
    pub strategy: Regrowth,
    pub dangling_cleanup: bool,
    pub seed: u64,
    /// Rewire after every `interval`-th epoch; 0 disables rewiring.
    pub interval: usize,
}

impl Default for TopologyUpdateConfig {
    fn default() -> Self {
        Self { prune_fraction: 0.3, strategy: Regrowth::Ch3l3, dangling_cleanup: true, seed: 0, interval: 1 }
    }
}

impl TopologyUpdateConfig {
    pub fn validate(&self) -> Result<(), TopologyError> {
        if !(self.prune_fraction > 0.0 && self.prune_fraction < 1.0) {
            return Err(TopologyError::InvalidConfig(format!("prune fraction {} outside (0, 1)", self.prune_fraction)));
        }
        Ok(())
    }

    /// Whether a rewiring step follows `epoch` (1-based).
    pub fn due(&self, epoch: usize) -> bool {
        self.interval > 0 && epoch.is_multiple_of(self.interval)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerUpdate {
    /// Links removed by magnitude pruning.
    pub pruned: usize,
    /// Links removed because they touched a disconnected neuron.
    pub dangling_removed: usize,
    pub regrown: usize,
    /// Time spent pruning and regrowing this layer.
    pub duration: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub layers: Vec<LayerUpdate>,
    /// Time spent on the network-wide disconnected-neuron stage.
    pub cleanup_duration: Duration,
    /// Wall-clock time of the whole update.
    pub duration: Duration,
}

impl UpdateStats {
    pub fn removed(&self) -> usize {
        self.layers.iter().map(|l| l.pruned + l.dangling_removed).sum()
    }

    pub fn regrown(&self) -> usize {
        self.layers.iter().map(|l| l.regrown).sum()
    }
}

/// Apply one rewiring step. `step` (usually the epoch number) selects the
/// random stream, so repeated updates with the same config differ.
pub fn topology_update(
    net: &mut Network,
    config: &TopologyUpdateConfig,
    step: u64,
) -> Result<UpdateStats, TopologyError> {
    config.validate()?;
    let start = Instant::now();
    let before = net.edge_counts();
    let mut layers = Vec::with_capacity(before.len());
    for layer in net.layers_mut() {
        let t = Instant::now();
        let pruned = prune_weakest(layer, config.prune_fraction)?;
        layers.push(LayerUpdate { pruned, dangling_removed: 0, regrown: 0, duration: t.elapsed() });
    }
    let t = Instant::now();
    if config.dangling_cleanup {
        for (stats, removed) in layers.iter_mut().zip(remove_disconnected(net)) {
            stats.dangling_removed = removed;
        }
    }
    let cleanup_duration = t.elapsed();
    for (l, (layer, stats)) in net.layers_mut().iter_mut().zip(layers.iter_mut()).enumerate() {
        let t = Instant::now();
        let mut rng = seed::rng(seed::derive_path(config.seed, &[seed::stream::TOPOLOGY, step, l as u64]));
        let added = regrow(layer, stats.pruned + stats.dangling_removed, config.strategy, &mut rng)?;
        stats.regrown = added.len();
        stats.duration += t.elapsed();
    }
    debug_assert_eq!(net.edge_counts(), before);
    Ok(UpdateStats { layers, cleanup_duration, duration: start.elapsed() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_network;
    use std::collections::HashSet;

    #[test]
    fn conserves_link_counts() {
        for strategy in [Regrowth::Rlr, Regrowth::Ch3l3, Regrowth::L3count] {
            let mut net = init_network(&[100, 80, 80, 80], 10, 0.05, 1).unwrap();
            let before = net.edge_counts();
            let config = TopologyUpdateConfig { strategy, ..Default::default() };
            let stats = topology_update(&mut net, &config, 1).unwrap();
            assert_eq!(net.edge_counts(), before);
            assert_eq!(stats.removed(), stats.regrown());
        }
    }

    #[test]
    fn without_cleanup_exactly_floor_is_removed() {
        let mut net = init_network(&[100, 80, 80], 10, 0.05, 2).unwrap();
        let before = net.edge_counts();
        let config = TopologyUpdateConfig { dangling_cleanup: false, strategy: Regrowth::Rlr, ..Default::default() };
        let stats = topology_update(&mut net, &config, 0).unwrap();
        for (s, &e) in stats.layers.iter().zip(&before) {
            assert_eq!(s.pruned, fraction_of(0.3, e));
            assert_eq!(s.dangling_removed, 0);
            assert_eq!(s.regrown, s.pruned);
        }
    }

    #[test]
    fn rejects_bad_fraction() {
        let mut net = init_network(&[10, 10], 2, 0.3, 0).unwrap();
        for f in [0.0, 1.0, -0.2] {
            let config = TopologyUpdateConfig { prune_fraction: f, ..Default::default() };
            assert!(matches!(topology_update(&mut net, &config, 0), Err(TopologyError::InvalidConfig(_))));
        }
    }

    #[test]
    fn repeated_random_updates_never_duplicate_links() {
        let mut net = init_network(&[30, 20, 20], 4, 0.2, 5).unwrap();
        let config = TopologyUpdateConfig { strategy: Regrowth::Rlr, ..Default::default() };
        for step in 0..50 {
            topology_update(&mut net, &config, step).unwrap();
            for layer in net.layers() {
                let set: HashSet<(usize, usize)> = layer.edges().map(|e| (e.input, e.output)).collect();
                assert_eq!(set.len(), layer.edge_count());
            }
        }
    }
}
