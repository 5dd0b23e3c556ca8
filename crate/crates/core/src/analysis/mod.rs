//! Weight-magnitude densities, aggregation over replicas, and the CSV/SVG
//! report.

pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::network::{snapshot, Network, NetworkError};
use crate::robustness::{PerturbationKind, RobustnessCurve, RobustnessError};
use crate::stats::{self, Summary};
use crate::train::{TrainError, TrainingHistory, HISTORY_FILE};
use svg::{BarChart, LineChart, Series};

pub const DEFAULT_BINS: usize = 200;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("network has no sparse links")]
    EmptyNetwork,
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("runs are not aligned on a common grid")]
    GridMismatch,
    #[error("nothing to report")]
    EmptyInput,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    History(#[from] TrainError),
    #[error(transparent)]
    Curve(#[from] RobustnessError),
    #[error(transparent)]
    Snapshot(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityScope {
    Pooled,
    Layer(usize),
}

/// Histogram density over |w| with unit integral.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// `bins + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub scope: DensityScope,
}

impl DensityEstimate {
    pub fn integral(&self) -> f64 {
        self.density.iter().zip(self.edges.windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum()
    }

    /// Geometric bin centres (arithmetic when an edge is zero).
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| if e[0] > 0.0 { (e[0] * e[1]).sqrt() } else { (e[0] + e[1]) / 2.0 }).collect()
    }
}

/// Density of |w| pooled over every sparse layer of `net`, on `bins`
/// logarithmically spaced bins spanning the observed range.
pub fn weight_density(net: &Network, bins: usize) -> Result<DensityEstimate, ReportError> {
    density_of(net.layers().iter().flat_map(|l| l.weights().iter().map(|w| w.abs())), bins, DensityScope::Pooled)
}

/// Density of |w| pooled over all sparse layers of several networks.
pub fn pooled_weight_density(nets: &[Network], bins: usize) -> Result<DensityEstimate, ReportError> {
    density_of(
        nets.iter().flat_map(|n| n.layers().iter().flat_map(|l| l.weights().iter().map(|w| w.abs()))),
        bins,
        DensityScope::Pooled,
    )
}

pub fn layer_weight_density(net: &Network, layer: usize, bins: usize) -> Result<DensityEstimate, ReportError> {
    density_of(net.layer(layer).weights().iter().map(|w| w.abs()), bins, DensityScope::Layer(layer))
}

fn density_of(
    values: impl Iterator<Item = f64>,
    bins: usize,
    scope: DensityScope,
) -> Result<DensityEstimate, ReportError> {
    if bins < 2 {
        return Err(ReportError::TooFewBins(bins));
    }
    let values: Vec<f64> = values.collect();
    if values.is_empty() {
        return Err(ReportError::EmptyNetwork);
    }
    let lo = values.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let mut counts = vec![0usize; bins];
    let edges: Vec<f64> = if !(hi > lo) {
        // one distinct magnitude: linear bins starting at it
        let v = if hi > 0.0 { hi } else { 0.0 };
        let span = if v > 0.0 { v } else { 1.0 };
        counts[0] = values.len();
        (0..=bins).map(|k| v + span * k as f64 / bins as f64).collect()
    } else {
        let (a, b) = (lo.ln(), hi.ln());
        let step = (b - a) / bins as f64;
        for &v in &values {
            let k = if v > 0.0 { ((v.ln() - a) / step).floor().max(0.0) as usize } else { 0 };
            counts[k.min(bins - 1)] += 1;
        }
        let mut e: Vec<f64> = (0..=bins).map(|k| (a + step * k as f64).exp()).collect();
        e[0] = if values.contains(&0.0) { 0.0 } else { lo };
        e[bins] = hi;
        e
    };
    let n = values.len() as f64;
    let density = counts.iter().zip(edges.windows(2)).map(|(&c, e)| c as f64 / (n * (e[1] - e[0]))).collect();
    Ok(DensityEstimate { edges, density, scope })
}

/// One run's curve: `y[k]` observed at `x[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl RunSeries {
    pub fn accuracy(history: &TrainingHistory) -> Self {
        Self { x: history.epochs.iter().map(|e| e.epoch as f64).collect(), y: history.accuracies() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub x: Vec<f64>,
    pub stats: Vec<Summary>,
}

/// Per-grid-point median, 40th/60th percentiles, mean and standard deviation
/// over runs that share the same grid.
pub fn aggregate_curves(runs: &[RunSeries]) -> Result<AggregateCurve, ReportError> {
    let first = runs.first().ok_or(ReportError::EmptyInput)?;
    if runs.iter().any(|r| r.x != first.x || r.y.len() != r.x.len()) {
        return Err(ReportError::GridMismatch);
    }
    let stats = (0..first.x.len())
        .map(|k| Summary::of(&runs.iter().map(|r| r.y[k]).collect::<Vec<_>>()).expect("non-empty"))
        .collect();
    Ok(AggregateCurve { x: first.x.clone(), stats })
}

/// Everything a report is built from, keyed by group name (usually the
/// regrowth strategy or run name).
#[derive(Debug, Clone, Default)]
pub struct ReportInput {
    pub histories: BTreeMap<String, Vec<TrainingHistory>>,
    pub curves: BTreeMap<String, Vec<RobustnessCurve>>,
    pub densities: BTreeMap<String, DensityEstimate>,
}

impl ReportInput {
    pub fn is_empty(&self) -> bool {
        self.histories.values().all(Vec::is_empty)
            && self.curves.values().all(Vec::is_empty)
            && self.densities.is_empty()
    }

    /// Collect inputs from a results tree: every directory holding
    /// `history.csv` is a replica of the group named by its parent
    /// directory; `network.snap` next to it feeds the density; any
    /// `*samples.csv` robustness file belongs to the group of its directory.
    pub fn from_dir(root: &Path, bins: usize) -> Result<Self, ReportError> {
        let mut input = Self::default();
        let mut nets: BTreeMap<String, Vec<Network>> = BTreeMap::new();
        let mut dirs = vec![root.to_path_buf()];
        let mut all = Vec::new();
        while let Some(d) = dirs.pop() {
            let mut entries: Vec<PathBuf> =
                std::fs::read_dir(&d)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
            entries.sort();
            for p in entries {
                if p.is_dir() {
                    dirs.push(p);
                } else {
                    all.push(p);
                }
            }
        }
        all.sort();
        let group_of = |dir: &Path| {
            let rel = dir.strip_prefix(root).unwrap_or(dir).to_string_lossy().replace('\\', "/");
            if rel.is_empty() {
                root.file_name().map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned())
            } else {
                rel
            }
        };
        for p in &all {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let dir = p.parent().unwrap_or(root);
            if name == HISTORY_FILE {
                let group = group_of(dir.parent().filter(|g| g.starts_with(root) && *g != root).unwrap_or(dir));
                input.histories.entry(group.clone()).or_default().push(TrainingHistory::read_dir(dir)?);
                let snap = dir.join(crate::train::SNAPSHOT_FILE);
                if snap.exists() {
                    nets.entry(group).or_default().push(snapshot::load(&snap)?);
                }
            } else if name.ends_with("samples.csv") {
                let curve = RobustnessCurve::from_samples_csv(&std::fs::read_to_string(p)?)?;
                input.curves.entry(group_of(dir)).or_default().push(curve);
            }
        }
        for (group, n) in nets {
            input.densities.insert(group, pooled_weight_density(&n, bins)?);
        }
        Ok(input)
    }
}

fn csv_row(out: &mut String, fields: &[String]) {
    let _ = writeln!(out, "{}", fields.join(","));
}

fn summary_fields(s: &Summary) -> [String; 5] {
    [s.median, s.p40, s.p60, s.mean, s.std].map(|v| v.to_string())
}

/// Files of a report, in memory. Names are relative to the report directory.
pub fn render_report(input: &ReportInput) -> Result<BTreeMap<String, String>, ReportError> {
    if input.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut files = BTreeMap::new();

    let histories: Vec<(&String, &Vec<TrainingHistory>)> =
        input.histories.iter().filter(|(_, h)| !h.is_empty()).collect();
    if !histories.is_empty() {
        let mut csv = String::from("group,epoch,median,p40,p60,mean,std\n");
        let mut chart = LineChart {
            title: "Test accuracy".into(),
            x_label: "epoch".into(),
            y_label: "accuracy".into(),
            log_x: true,
            series: vec![],
        };
        let mut timing = String::from("group,replicas,mean_update_seconds,std\n");
        let mut bars =
            BarChart { title: "Topology update duration".into(), y_label: "seconds per update".into(), bars: vec![] };
        for (group, runs) in &histories {
            let agg = aggregate_curves(&runs.iter().map(RunSeries::accuracy).collect::<Vec<_>>())?;
            for (x, s) in agg.x.iter().zip(&agg.stats) {
                let mut row = vec![group.to_string(), x.to_string()];
                row.extend(summary_fields(s));
                csv_row(&mut csv, &row);
            }
            chart.series.push(Series {
                name: group.to_string(),
                points: agg.x.iter().zip(&agg.stats).map(|(&x, s)| (x, s.median)).collect(),
                band: agg.x.iter().zip(&agg.stats).map(|(&x, s)| (x, s.p40, s.p60)).collect(),
            });
            let means: Vec<f64> = runs.iter().filter_map(TrainingHistory::mean_update_seconds).collect();
            if let (Some(m), Some(sd)) = (stats::mean(&means), stats::std_dev(&means)) {
                csv_row(&mut timing, &[group.to_string(), means.len().to_string(), m.to_string(), sd.to_string()]);
                bars.bars.push((group.to_string(), m, sd));
            }
        }
        files.insert("accuracy.csv".into(), csv);
        files.insert("accuracy.svg".into(), chart.render());
        files.insert("update_timing.csv".into(), timing);
        files.insert("update_timing.svg".into(), bars.render());
    }

    let mut by_kind: BTreeMap<PerturbationKind, Vec<(&String, &RobustnessCurve)>> = BTreeMap::new();
    for (group, curves) in &input.curves {
        for c in curves {
            by_kind.entry(c.kind).or_default().push((group, c));
        }
    }
    for (kind, curves) in by_kind {
        let mut csv = String::from("group,intensity,median,p40,p60,mean,std\n");
        let mut chart = LineChart {
            title: format!("Accuracy under {kind}"),
            x_label: if kind == PerturbationKind::WeightModify {
                "noise multiplier".into()
            } else {
                "intensity".into()
            },
            y_label: "accuracy".into(),
            log_x: false,
            series: vec![],
        };
        let mut groups: BTreeMap<&String, Vec<&RobustnessCurve>> = BTreeMap::new();
        for (g, c) in curves {
            groups.entry(g).or_default().push(c);
        }
        for (group, cs) in groups {
            let grid = &cs[0].grid;
            if cs.iter().any(|c| &c.grid != grid) {
                return Err(ReportError::GridMismatch);
            }
            let pooled: Vec<Summary> = (0..grid.len())
                .map(|g| {
                    Summary::of(&cs.iter().flat_map(|c| c.samples[g].iter().copied()).collect::<Vec<_>>())
                        .expect("replicas")
                })
                .collect();
            for (x, s) in grid.iter().zip(&pooled) {
                let mut row = vec![group.to_string(), x.to_string()];
                row.extend(summary_fields(s));
                csv_row(&mut csv, &row);
            }
            chart.series.push(Series {
                name: group.to_string(),
                points: grid.iter().zip(&pooled).map(|(&x, s)| (x, s.mean)).collect(),
                band: grid.iter().zip(&pooled).map(|(&x, s)| (x, s.p40, s.p60)).collect(),
            });
        }
        files.insert(format!("robustness_{kind}.csv"), csv);
        files.insert(format!("robustness_{kind}.svg"), chart.render());
    }

    if !input.densities.is_empty() {
        let mut csv = String::from("group,bin_low,bin_high,density\n");
        let mut chart = LineChart {
            title: "Weight magnitude density".into(),
            x_label: "|w|".into(),
            y_label: "density".into(),
            log_x: true,
            series: vec![],
        };
        for (group, d) in &input.densities {
            for (e, v) in d.edges.windows(2).zip(&d.density) {
                csv_row(&mut csv, &[group.to_string(), e[0].to_string(), e[1].to_string(), v.to_string()]);
            }
            chart.series.push(Series {
                name: group.to_string(),
                points: d.centers().into_iter().zip(d.density.iter().copied()).collect(),
                band: vec![],
            });
        }
        files.insert("weight_density.csv".into(), csv);
        files.insert("weight_density.svg".into(), chart.render());
    }
    Ok(files)
}

/// Write the report into `out_dir`. Files are first written to a staging
/// directory next to it and only moved into place once all succeeded.
pub fn emit_report(input: &ReportInput, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let files = render_report(input)?;
    let parent = out_dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent)?;
    let staging = parent.join(format!(
        ".{}.staging-{}",
        out_dir.file_name().map_or_else(|| "report".into(), |n| n.to_string_lossy()),
        std::process::id()
    ));
    let result = (|| -> Result<Vec<PathBuf>, ReportError> {
        std::fs::create_dir_all(&staging)?;
        for (name, body) in &files {
            std::fs::write(staging.join(name), body)?;
        }
        std::fs::create_dir_all(out_dir)?;
        let mut written = Vec::new();
        for name in files.keys() {
            let dst = out_dir.join(name);
            std::fs::rename(staging.join(name), &dst)?;
            written.push(dst);
        }
        Ok(written)
    })();
    let _ = std::fs::remove_dir_all(&staging);
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, DenseReadout, SparseLayer};
    use crate::train::EpochRecord;

    fn constant_net(w: f64) -> Network {
        let layer = SparseLayer::from_edges(3, 3, [(0, 0, w), (1, 1, -w), (2, 2, w)], vec![0.0; 3]).unwrap();
        Network::new(vec![layer], DenseReadout::zeros(3, 2)).unwrap()
    }

    fn history(acc: &[f64], secs: f64) -> TrainingHistory {
        TrainingHistory {
            seed: 1,
            epochs: acc
                .iter()
                .enumerate()
                .map(|(i, &a)| EpochRecord {
                    epoch: i + 1,
                    accuracy: a,
                    loss: 1.0 - a,
                    update_seconds: secs,
                    edges: vec![5],
                    rewiring: vec![Default::default()],
                })
                .collect(),
        }
    }

    fn sample_input() -> ReportInput {
        let mut input = ReportInput::default();
        input.histories.insert("ch3l3".into(), vec![history(&[0.5, 0.9, 0.95], 0.2), history(&[0.4, 0.8, 0.96], 0.3)]);
        input.histories.insert("rlr".into(), vec![history(&[0.3, 0.7, 0.93], 0.1)]);
        input.curves.insert(
            "ch3l3".into(),
            vec![RobustnessCurve {
                kind: PerturbationKind::RandomPrune,
                grid: vec![0.0, 0.5, 1.0],
                samples: vec![vec![0.95, 0.95], vec![0.6, 0.7], vec![0.1, 0.1]],
            }],
        );
        input
            .densities
            .insert("ch3l3".into(), weight_density(&init_network(&[50, 40], 3, 0.3, 0).unwrap(), 50).unwrap());
        input
    }

    #[test]
    fn constant_weights_fill_one_bin() {
        let d = weight_density(&constant_net(0.25), 10).unwrap();
        let occupied: Vec<usize> = (0..10).filter(|&k| d.density[k] > 0.0).collect();
        assert_eq!(occupied, vec![0]);
        assert!((d.density[0] - 1.0 / (d.edges[1] - d.edges[0])).abs() < 1e-9);
        assert!((d.integral() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn density_integrates_to_one() {
        let net = init_network(&[784, 300, 300], 10, 0.05, 4).unwrap();
        let d = weight_density(&net, DEFAULT_BINS).unwrap();
        assert_eq!(d.edges.len(), DEFAULT_BINS + 1);
        assert!(d.density.iter().all(|&v| v >= 0.0));
        assert!((d.integral() - 1.0).abs() < 1e-9);
        assert!(d.edges.windows(2).all(|e| e[0] < e[1]));
        for l in 0..2 {
            assert!((layer_weight_density(&net, l, 30).unwrap().integral() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn density_errors() {
        let empty = Network::new(vec![SparseLayer::empty(3, 3)], DenseReadout::zeros(3, 2)).unwrap();
        assert!(matches!(weight_density(&empty, 10), Err(ReportError::EmptyNetwork)));
        assert!(matches!(weight_density(&constant_net(1.0), 1), Err(ReportError::TooFewBins(1))));
    }

    #[test]
    fn aggregation() {
        let run = |y: Vec<f64>| RunSeries { x: vec![1.0, 2.0], y };
        let single = aggregate_curves(&[run(vec![0.3, 0.6])]).unwrap();
        assert_eq!(single.stats[1].median, 0.6);
        assert_eq!(single.stats[1].p40, 0.6);
        let three = aggregate_curves(&[run(vec![0.2, 0.0]), run(vec![0.6, 0.0]), run(vec![0.4, 0.0])]).unwrap();
        assert_eq!(three.stats[0].median, 0.4);
        assert!(three.stats[0].p40 <= three.stats[0].median && three.stats[0].median <= three.stats[0].p60);
        let reversed = aggregate_curves(&[run(vec![0.4, 0.0]), run(vec![0.6, 0.0]), run(vec![0.2, 0.0])]).unwrap();
        assert_eq!(three, reversed);
        let other = RunSeries { x: vec![1.0, 3.0], y: vec![0.0, 0.0] };
        assert!(matches!(aggregate_curves(&[run(vec![0.0, 0.0]), other]), Err(ReportError::GridMismatch)));
    }

    #[test]
    fn emits_expected_files_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report");
        let input = sample_input();
        emit_report(&input, &out).unwrap();
        let mut names: Vec<String> =
            std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        assert_eq!(
            names,
            [
                "accuracy.csv",
                "accuracy.svg",
                "robustness_random-prune.csv",
                "robustness_random-prune.svg",
                "update_timing.csv",
                "update_timing.svg",
                "weight_density.csv",
                "weight_density.svg"
            ]
        );
        let first = std::fs::read(out.join("accuracy.svg")).unwrap();
        emit_report(&input, &out).unwrap();
        assert_eq!(first, std::fs::read(out.join("accuracy.svg")).unwrap());
        let acc = std::fs::read_to_string(out.join("accuracy.csv")).unwrap();
        assert!(acc.contains("ch3l3,3,0.955,"));
        let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn empty_input_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report");
        assert!(matches!(emit_report(&ReportInput::default(), &out), Err(ReportError::EmptyInput)));
        assert!(!out.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn misaligned_curves_abort_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report");
        let mut input = sample_input();
        input.histories.get_mut("rlr").unwrap().push(history(&[0.1, 0.2], 0.1));
        assert!(matches!(emit_report(&input, &out), Err(ReportError::GridMismatch)));
        assert!(!out.exists());
    }

    #[test]
    fn reads_back_a_results_tree() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        for (r, h) in [history(&[0.5, 0.9], 0.2), history(&[0.6, 0.8], 0.1)].iter().enumerate() {
            let d = root.join(format!("ch3l3/replica_{r:02}"));
            h.write_dir(&d).unwrap();
            snapshot::save(&init_network(&[20, 10], 2, 0.3, r as u64).unwrap(), &d.join("network.snap")).unwrap();
        }
        let curve = RobustnessCurve {
            kind: PerturbationKind::WeightModify,
            grid: vec![0.0, 1.0],
            samples: vec![vec![0.9], vec![0.5]],
        };
        std::fs::create_dir_all(root.join("robust")).unwrap();
        std::fs::write(root.join("robust/weight-modify_samples.csv"), curve.samples_csv()).unwrap();
        let input = ReportInput::from_dir(root, 20).unwrap();
        assert_eq!(input.histories["ch3l3"].len(), 2);
        assert_eq!(input.curves["robust"], vec![curve]);
        assert!((input.densities["ch3l3"].integral() - 1.0).abs() < 1e-9);
    }
}
