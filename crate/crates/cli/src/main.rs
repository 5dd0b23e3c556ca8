// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use sparselab_core::analysis::{emit_report, ReportInput, DEFAULT_BINS};
use sparselab_core::dataset::{fetch_dataset, load_named, DatasetName};
use sparselab_core::network::{snapshot, Network};
use sparselab_core::robustness::{sweep, PerturbationKind, SweepConfig};
use sparselab_core::train::{run_experiment_suite, train_with, TrainConfig, SNAPSHOT_FILE};

#[derive(Parser)]
#[command(name = "sparselab", version, about = "Dynamic sparse training and robustness experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download and verify a dataset.
    FetchData {
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value = "data")]
        root: PathBuf,
        /// Base URL of a mirror, or a .tgz/.zip archive URL. `file://` works.
        #[arg(long)]
        mirror: Option<String>,
    },
    /// Train one network, or a suite of seeded replicas.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Run this many replicas with seeds derived from the config seed.
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Override the dataset directory of the config.
        #[arg(long)]
        data_root: Option<PathBuf>,
    },
    /// Sweep accuracy under a perturbation.
    Robustness {
        /// A snapshot file, or a directory searched for `*.snap` files.
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        kind: String,
        /// Comma-separated intensities, or `start:stop:step`.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 32)]
        replicas: usize,
        #[arg(long, default_value = "mnist")]
        dataset: String,
        #[arg(long, default_value = "data")]
        data_root: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "robustness")]
        out: PathBuf,
    },
    /// Build CSV and SVG figures from a results directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::FetchData { dataset, root, mirror } => {
            let name: DatasetName = dataset.parse()?;
            let report = fetch_dataset(name, &root, mirror.as_deref())?;
            for f in &report.files {
                println!("{}", f.display());
            }
            log::info!(
                "{}",
                if report.downloaded { "downloaded and verified" } else { "already present and verified" }
            );
        }
        Command::Train { config, replicas, out, data_root } => {
            let mut cfg = TrainConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Some(root) = data_root {
                cfg.data_root = root;
            }
            match replicas {
                Some(n) => train_suite(&config, cfg, n, &out)?,
                None => train_single(&cfg, &out)?,
            }
        }
        Command::Robustness { snapshot, kind, grid, replicas, dataset, data_root, seed, out } => {
            let kind: PerturbationKind = kind.parse()?;
            let grid = parse_grid(&grid)?;
            let nets = load_snapshots(&snapshot)?;
            let (_, test) = load_named(&dataset, &data_root)?;
            log::info!("{kind}: {} snapshot(s), {} grid points, {replicas} replicas", nets.len(), grid.len());
            let curve = sweep(&nets, &SweepConfig { kind, grid, replicas, seed }, &test)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join(format!("{kind}_samples.csv")), curve.samples_csv())?;
            std::fs::write(out.join(format!("{kind}_summary.csv")), curve.summary_csv())?;
            print!("{}", curve.summary_csv());
        }
        Command::Report { input, out, bins } => {
            let data = ReportInput::from_dir(&input, bins)?;
            for path in emit_report(&data, &out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn train_single(cfg: &TrainConfig, out: &Path) -> Result<()> {
    let (train_set, test_set) = load_named(&cfg.dataset, &cfg.data_root)?;
    let checkpoints = out.join("checkpoints");
    let (net, history) =
        train_with(cfg, &train_set, &test_set, Some(&checkpoints), |_| std::ops::ControlFlow::Continue(()))?;
    history.write_dir(out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    snapshot::save(&net, &out.join(SNAPSHOT_FILE))?;
    println!("final accuracy {}", history.final_accuracy().unwrap_or(0.0));
    Ok(())
}

fn train_suite(config_path: &Path, cfg: TrainConfig, replicas: usize, out: &Path) -> Result<()> {
    if replicas == 0 {
        bail!("--replicas must be at least 1");
    }
    let name = config_path.file_stem().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
    let report = run_experiment_suite(&[(name, cfg)], replicas, out)?;
    for o in &report.outcomes {
        match &o.result {
            Ok(acc) => println!("{} replica {:02} seed {}: accuracy {acc}", o.name, o.replica, o.seed),
            Err(e) => println!("{} replica {:02} seed {}: FAILED {e}", o.name, o.replica, o.seed),
        }
    }
    let failed = report.failed().count();
    if failed == report.outcomes.len() {
        bail!("all {failed} replica(s) failed");
    }
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    if let [start, stop, step] = text.split(':').collect::<Vec<_>>()[..] {
        let (start, stop, step): (f64, f64, f64) = (start.trim().parse()?, stop.trim().parse()?, step.trim().parse()?);
        if !(step > 0.0) || stop < start {
            bail!("bad grid range {text}");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // round to kill accumulated binary noise, e.g. 0.15000000000000002
        return Ok((0..=n).map(|k| ((start + step * k as f64) * 1e12).round() / 1e12).collect());
    }
    text.split(',').map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid value {s:?}"))).collect()
}

fn load_snapshots(path: &Path) -> Result<Vec<Network>> {
    if path.is_file() {
        return Ok(vec![snapshot::load(path)?]);
    }
    let mut found = Vec::new();
    let mut dirs = vec![path.to_path_buf()];
    while let Some(d) = dirs.pop() {
        for entry in std::fs::read_dir(&d).with_context(|| format!("reading {}", d.display()))? {
            let p = entry?.path();
            if p.is_dir() {
                if p.file_name() != Some("checkpoints".as_ref()) {
                    dirs.push(p);
                }
            } else if p.extension() == Some("snap".as_ref()) {
                found.push(p);
            }
        }
    }
    found.sort();
    if found.is_empty() {
        bail!("no snapshots under {}", path.display());
    }
    found.iter().map(|p| snapshot::load(p).with_context(|| format!("loading {}", p.display()))).collect()
}
