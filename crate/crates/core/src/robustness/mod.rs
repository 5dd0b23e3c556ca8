//! Accuracy under structural and weight perturbations, without retraining.

mod perturb;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use perturb::{
    mean_magnitude, random_prune, reverse_weight_order_prune, weight_modify, weight_order_prune, weight_shuffle,
};

use crate::dataset::LabeledImageSet;
use crate::network::Network;
use crate::seed::{self, stream};
use crate::stats::Summary;
use crate::topology::{fraction_of, MagnitudeOrder};
use crate::train::{evaluate, TrainError};

#[derive(Debug, Error)]
pub enum RobustnessError {
    #[error("{kind} intensity {value} out of range")]
    IntensityOutOfRange { kind: &'static str, value: f64 },
    #[error("all weights in every layer are equal; nothing to shuffle")]
    DegenerateRange,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("unknown perturbation kind {0:?}")]
    UnknownKind(String),
    #[error("malformed curve file: {0}")]
    Parse(String),
    #[error(transparent)]
    Evaluation(#[from] TrainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    RandomPrune,
    WeightOrderPrune,
    ReverseWeightOrderPrune,
    WeightShuffle,
    WeightModify,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 5] = [
        PerturbationKind::RandomPrune,
        PerturbationKind::WeightOrderPrune,
        PerturbationKind::ReverseWeightOrderPrune,
        PerturbationKind::WeightShuffle,
        PerturbationKind::WeightModify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::RandomPrune => "random-prune",
            PerturbationKind::WeightOrderPrune => "weight-order-prune",
            PerturbationKind::ReverseWeightOrderPrune => "reverse-weight-order-prune",
            PerturbationKind::WeightShuffle => "weight-shuffle",
            PerturbationKind::WeightModify => "weight-modify",
        }
    }

    /// Pruning kinds remove links and are applied cumulatively in a sweep.
    pub fn is_pruning(self) -> bool {
        matches!(
            self,
            PerturbationKind::RandomPrune
                | PerturbationKind::WeightOrderPrune
                | PerturbationKind::ReverseWeightOrderPrune
        )
    }

    /// Whether the outcome depends on a random seed.
    pub fn is_stochastic(self) -> bool {
        !matches!(self, PerturbationKind::WeightOrderPrune | PerturbationKind::ReverseWeightOrderPrune)
    }

    fn check(self, value: f64) -> Result<(), RobustnessError> {
        let ok = match self {
            PerturbationKind::WeightModify => value >= 0.0 && value.is_finite(),
            _ => (0.0..=1.0).contains(&value),
        };
        if ok {
            Ok(())
        } else {
            Err(RobustnessError::IntensityOutOfRange { kind: self.as_str(), value })
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationKind {
    type Err = RobustnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL.into_iter().find(|k| k.as_str() == norm).ok_or_else(|| RobustnessError::UnknownKind(s.to_string()))
    }
}

/// One perturbation: its kind, intensity (fraction p, bin ratio r or noise
/// multiplier m) and the seed of its random stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub intensity: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, intensity: f64, seed: u64) -> Result<Self, RobustnessError> {
        kind.check(intensity)?;
        Ok(Self { kind, intensity, seed })
    }

    pub fn apply(&self, net: &mut Network) -> Result<(), RobustnessError> {
        let mut rng = seed::rng(self.seed);
        match self.kind {
            PerturbationKind::RandomPrune => random_prune(net, self.intensity, &mut rng),
            PerturbationKind::WeightOrderPrune => weight_order_prune(net, self.intensity),
            PerturbationKind::ReverseWeightOrderPrune => reverse_weight_order_prune(net, self.intensity),
            PerturbationKind::WeightShuffle => weight_shuffle(net, self.intensity, &mut rng),
            PerturbationKind::WeightModify => weight_modify(net, self.intensity, &mut rng),
        }
    }
}

/// Accuracy samples of one perturbation kind over a grid of intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCurve {
    pub kind: PerturbationKind,
    pub grid: Vec<f64>,
    /// `samples[g][r]`: accuracy at grid point `g` for replica `r`.
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub intensity: f64,
    pub summary: Summary,
}

impl RobustnessCurve {
    pub fn replicas(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn summary(&self) -> Vec<CurvePoint> {
        self.grid
            .iter()
            .zip(&self.samples)
            .map(|(&intensity, s)| CurvePoint { intensity, summary: Summary::of(s).expect("at least one replica") })
            .collect()
    }

    /// Mean accuracy at the grid point closest to `intensity`.
    pub fn mean_at(&self, intensity: f64) -> Option<f64> {
        let g = (0..self.grid.len())
            .min_by(|&a, &b| (self.grid[a] - intensity).abs().total_cmp(&(self.grid[b] - intensity).abs()))?;
        crate::stats::mean(&self.samples[g])
    }

    /// `kind,intensity,replica,accuracy`
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("kind,intensity,replica,accuracy\n");
        for (p, s) in self.grid.iter().zip(&self.samples) {
            for (r, a) in s.iter().enumerate() {
                out.push_str(&format!("{},{p},{r},{a}\n", self.kind));
            }
        }
        out
    }

    /// `kind,intensity,mean,median,p40,p60,std`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("kind,intensity,mean,median,p40,p60,std\n");
        for pt in self.summary() {
            let s = pt.summary;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.kind, pt.intensity, s.mean, s.median, s.p40, s.p60, s.std
            ));
        }
        out
    }

    /// Inverse of [`RobustnessCurve::samples_csv`].
    pub fn from_samples_csv(text: &str) -> Result<Self, RobustnessError> {
        let bad = |m: String| RobustnessError::Parse(m);
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("kind,intensity,replica,accuracy") {
            return Err(bad("unexpected header".into()));
        }
        let mut kind = None;
        let mut grid: Vec<f64> = Vec::new();
        let mut samples: Vec<Vec<f64>> = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(format!("line {} has {} fields", n + 2, f.len())));
            }
            let k: PerturbationKind = f[0].parse()?;
            if *kind.get_or_insert(k) != k {
                return Err(bad("mixed kinds".into()));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("line {}: {e}", n + 2)));
            let (p, r, a) = (num(f[1])?, f[2].trim().parse::<usize>().map_err(|e| bad(e.to_string()))?, num(f[3])?);
            if grid.last() != Some(&p) {
                grid.push(p);
                samples.push(Vec::new());
            }
            let row = samples.last_mut().expect("pushed above");
            if r != row.len() {
                return Err(bad(format!("line {}: replica {r} out of order", n + 2)));
            }
            row.push(a);
        }
        let kind = kind.ok_or_else(|| bad("no samples".into()))?;
        let curve = Self { kind, grid, samples };
        curve.validate().map_err(|e| bad(e.to_string()))?;
        Ok(curve)
    }

    fn validate(&self) -> Result<(), RobustnessError> {
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(RobustnessError::InvalidSweep("grid is not strictly increasing".into()));
        }
        let r = self.replicas();
        if r == 0 || self.samples.iter().any(|s| s.len() != r) || self.samples.len() != self.grid.len() {
            return Err(RobustnessError::InvalidSweep("ragged samples".into()));
        }
        Ok(())
    }
}

/// Parameters of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kind: PerturbationKind,
    pub grid: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
}

/// Perturb and re-evaluate without any retraining.
///
/// Replica `r` perturbs a private copy of `snapshots[r % len]`. Pruning kinds
/// are applied cumulatively along the grid, always measured against the
/// original link count; shuffle and noise start from the pristine snapshot at
/// every grid point.
pub fn sweep(
    snapshots: &[Network],
    config: &SweepConfig,
    test: &LabeledImageSet,
) -> Result<RobustnessCurve, RobustnessError> {
    if snapshots.is_empty() {
        return Err(RobustnessError::InvalidSweep("no snapshots".into()));
    }
    if config.replicas == 0 || config.grid.is_empty() {
        return Err(RobustnessError::InvalidSweep("need at least one replica and one grid point".into()));
    }
    if config.grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(RobustnessError::InvalidSweep("grid is not strictly increasing".into()));
    }
    for &p in &config.grid {
        config.kind.check(p)?;
    }
    let per_replica: Vec<Vec<f64>> = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let net = &snapshots[r % snapshots.len()];
            let replica_seed = seed::derive_path(config.seed, &[stream::PERTURB, r as u64]);
            if config.kind.is_pruning() {
                cumulative_prune(net, config.kind, &config.grid, replica_seed, test)
            } else {
                config
                    .grid
                    .iter()
                    .enumerate()
                    .map(|(g, &p)| {
                        let mut copy = net.clone();
                        let spec = PerturbationSpec {
                            kind: config.kind,
                            intensity: p,
                            seed: seed::derive(replica_seed, g as u64),
                        };
                        match spec.apply(&mut copy) {
                            Ok(()) | Err(RobustnessError::DegenerateRange) => {}
                            Err(e) => return Err(e),
                        }
                        Ok(evaluate(&copy, test)?)
                    })
                    .collect()
            }
        })
        .collect::<Result<_, _>>()?;
    let samples = (0..config.grid.len()).map(|g| per_replica.iter().map(|r| r[g]).collect()).collect();
    Ok(RobustnessCurve { kind: config.kind, grid: config.grid.clone(), samples })
}

fn cumulative_prune(
    net: &Network,
    kind: PerturbationKind,
    grid: &[f64],
    replica_seed: u64,
    test: &LabeledImageSet,
) -> Result<Vec<f64>, RobustnessError> {
    let mut net = net.clone();
    let original = net.edge_counts();
    let mut rng = seed::rng(replica_seed);
    let mut out = Vec::with_capacity(grid.len());
    for &p in grid {
        for (layer, &e) in net.layers_mut().iter_mut().zip(&original) {
            let removed = e - layer.edge_count();
            let more = fraction_of(p, e).saturating_sub(removed);
            match kind {
                PerturbationKind::RandomPrune => perturb::remove_random(layer, more, &mut rng),
                PerturbationKind::WeightOrderPrune => perturb::remove_ranked(layer, more, MagnitudeOrder::Strongest),
                PerturbationKind::ReverseWeightOrderPrune => {
                    perturb::remove_ranked(layer, more, MagnitudeOrder::Weakest)
                }
                _ => unreachable!("only pruning kinds are cumulative"),
            }
        }
        out.push(evaluate(&net, test)?);
    }
    Ok(out)
}
