//! Command implementations behind the `dmac` binary.
//!
//! ```text
//! dmac synth --out blobs --n 300 --views 2 --clusters 3 --seed 7
//! dmac train --data blobs --out run --epochs 100 --repeats 3
//! dmac grid  --data blobs --out grid --alpha-grid 0.1,1 --beta-grid 0,0.01
//! dmac bench --ns 1000,2000,4000 --anchors 50 --out bench.csv
//! dmac eval  --data blobs --pred run/labels.txt
//! ```
//!
//! Settings resolve as defaults < `--config run.json` < flags.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    generate_synthetic, load_dataset, read_labels, read_matrix, save_dataset, write_labels,
    write_matrix, MatrixFormat, MultiViewDataset, SyntheticSpec,
};
use crate::error::{DmacError, Result};
use crate::eval::{accuracy, kmeans, nmi};
use crate::trainer::{
    grid_search, train, with_worker_pool, EpochLoss, Metrics, Model, TrainConfig, TrainResult,
};

/// Normalization used for every reported NMI.
pub const NMI_NORMALIZATION: &str = "geometric mean of entropies";

pub const REPORT_FILE: &str = "report.json";
pub const LOSSES_FILE: &str = "losses.csv";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const PRED_LABELS_FILE: &str = "labels.txt";
pub const GRID_FILE: &str = "grid.csv";

#[derive(Debug, Parser)]
#[command(name = "dmac", version, about = "Deep multi-view anchor clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic multi-view blobs dataset.
    Synth(SynthArgs),
    /// Train on a dataset directory and write the report and artifacts.
    Train(TrainArgs),
    /// Train every (alpha, beta) cell of a grid.
    Grid(GridArgs),
    /// Per-epoch wall time against the number of samples.
    Bench(BenchArgs),
    /// Score predicted labels or an embedding against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Dmx,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Dmx => MatrixFormat::Dmx,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub views: usize,
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Distance scale of the cluster centers.
    #[arg(long, default_value_t = 10.0)]
    pub spread: f64,
    /// Standard deviation of the within-cluster noise.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Do not request row normalization in the manifest.
    #[arg(long)]
    pub raw: bool,
}

/// Training settings shared by `train`, `grid` and `bench`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub anchors: Option<usize>,
    #[arg(long)]
    pub knn: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disable the anchor perturbation (U = Û).
    #[arg(long)]
    pub wo_pd: bool,
    /// Disable the cross-view consistency loss.
    #[arg(long)]
    pub wo_cm: bool,
}

impl TrainFlags {
    /// `base` < config file < flags, then validated.
    pub fn resolve(&self, base: TrainConfig) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => base,
        };
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(m) = self.anchors {
            cfg.anchors = Some(m);
        }
        if let Some(k) = self.knn {
            cfg.k_neighbors = k;
        }
        if let Some(lr) = self.lr {
            cfg.optimizer.learning_rate = lr;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.disable_perturbation |= self.wo_pd;
        cfg.disable_consistency |= self.wo_cm;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads a JSON config; missing fields take their defaults.
pub fn read_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| DmacError::Config {
        field: "config".into(),
        reason: format!("{}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| DmacError::Config {
        field: "config".into(),
        reason: format!("{}: {e}", path.display()),
    })
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Write each view's anchor graph of the first run as `PATH.{view}`.
    #[arg(long)]
    pub dump_graph: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub beta_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Sample counts to time.
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
    pub ns: Vec<usize>,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long, default_value_t = 2)]
    pub views: usize,
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    /// Timed runs per sample count.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Anchors and epochs used by `bench` unless overridden.
pub const BENCH_ANCHORS: usize = 50;
pub const BENCH_EPOCHS: usize = 5;

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Dataset directory providing the true labels.
    #[arg(long, required_unless_present = "truth")]
    pub data: Option<PathBuf>,
    /// True labels file, one integer per line.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Predicted labels file.
    #[arg(long, required_unless_present = "embedding")]
    pub pred: Option<PathBuf>,
    /// Embedding matrix to cluster with k-means instead of `--pred`.
    #[arg(long, conflicts_with = "pred")]
    pub embedding: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional JSON destination for the scores.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: PathBuf,
    pub n: usize,
    pub v: usize,
    pub c: usize,
}

impl DatasetInfo {
    fn of(path: &Path, data: &MultiViewDataset) -> Self {
        Self {
            path: path.to_path_buf(),
            n: data.n(),
            v: data.v(),
            c: data.c(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub setup_seconds: f64,
    pub mean_epoch_seconds: f64,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub anchors: usize,
    pub neighbors: usize,
    pub losses: Vec<EpochLoss>,
    pub metrics: Option<Metrics>,
    /// Largest `|U − Û|` entry of the last epoch.
    pub anchor_shift: f64,
    pub timing: Timing,
}

impl RunRecord {
    pub fn from_result(seed: u64, r: &TrainResult) -> Self {
        let anchor_shift = r
            .u_final
            .max_abs_diff(&r.anchors.u_hat)
            .unwrap_or(f64::INFINITY);
        Self {
            seed,
            anchors: r.anchor_count,
            neighbors: r.neighbors,
            losses: r.loss_history.clone(),
            metrics: r.metrics,
            anchor_shift,
            timing: Timing {
                setup_seconds: r.setup_seconds,
                mean_epoch_seconds: r.mean_epoch_seconds(),
                train_seconds: r.epoch_seconds.iter().sum(),
            },
        }
    }
}

/// Everything `train` records about a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub nmi_normalization: String,
    pub config: TrainConfig,
    pub dataset: DatasetInfo,
    pub runs: Vec<RunRecord>,
    /// Mean over runs, when labels are known.
    pub mean_metrics: Option<Metrics>,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

pub fn mean_metrics(metrics: &[Option<Metrics>]) -> Option<Metrics> {
    let known: Vec<Metrics> = metrics.iter().copied().collect::<Option<_>>()?;
    if known.is_empty() {
        return None;
    }
    let k = known.len() as f64;
    Some(Metrics {
        acc: known.iter().map(|m| m.acc).sum::<f64>() / k,
        nmi: known.iter().map(|m| m.nmi).sum::<f64>() / k,
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a).map(|_| ()),
        Command::Train(a) => {
            let report = cmd_train(&a)?;
            print_report(&report);
            Ok(())
        }
        Command::Grid(a) => {
            for row in cmd_grid(&a)?.iter().take(5) {
                println!("{row}");
            }
            Ok(())
        }
        Command::Bench(a) => cmd_bench(&a).map(|_| ()),
        Command::Eval(a) => {
            let m = cmd_eval(&a)?;
            println!("ACC {:.4}  NMI {:.4}", m.acc, m.nmi);
            Ok(())
        }
    }
}

fn print_report(report: &RunReport) {
    for run in &report.runs {
        let last = run.losses.last();
        print!(
            "seed {}: m = {}, k = {}, L = {}",
            run.seed,
            run.anchors,
            run.neighbors,
            last.map_or("-".to_string(), |l| format!("{:.4}", l.total))
        );
        match run.metrics {
            Some(m) => println!(", ACC {:.4}, NMI {:.4}", m.acc, m.nmi),
            None => println!(),
        }
    }
    if let (Some(m), true) = (report.mean_metrics, report.runs.len() > 1) {
        println!("mean: ACC {:.4}, NMI {:.4}", m.acc, m.nmi);
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<MultiViewDataset> {
    let spec = SyntheticSpec {
        spread: args.spread,
        noise: args.noise,
        ..SyntheticSpec::blobs(args.n, args.views, args.clusters, args.seed)
    };
    let data = generate_synthetic(&spec)?;
    save_dataset(&data, &args.out, args.format.into(), !args.raw)?;
    log::info!("wrote {} samples x {} views to {}", data.n(), data.v(), args.out.display());
    Ok(data)
}

pub fn write_losses(path: &Path, losses: &[EpochLoss]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "L", "L_AL", "L_CM", "L_SP"])?;
    for (e, l) in losses.iter().enumerate() {
        w.write_record([
            e.to_string(),
            l.total.to_string(),
            l.anchor.to_string(),
            l.consistency.to_string(),
            l.structure.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `{path}.{view}` for every view's anchor graph.
pub fn dump_graphs(path: &Path, result: &TrainResult) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(result.graphs.len());
    for (a, g) in result.graphs.iter().enumerate() {
        let mut name = path.as_os_str().to_owned();
        name.push(format!(".{a}"));
        let file = PathBuf::from(name);
        let mut w = BufWriter::new(File::create(&file)?);
        g.write_coo(&mut w)?;
        w.flush()?;
        written.push(file);
    }
    Ok(written)
}

fn write_artifacts(dir: &Path, result: &TrainResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let losses = dir.join(LOSSES_FILE);
    let embedding = dir.join(EMBEDDING_FILE);
    let labels = dir.join(PRED_LABELS_FILE);
    write_losses(&losses, &result.loss_history)?;
    write_matrix(&embedding, &result.z_final)?;
    write_labels(&labels, &result.labels)?;
    Ok(vec![losses, embedding, labels])
}

pub fn cmd_train(args: &TrainArgs) -> Result<RunReport> {
    if args.repeats == 0 {
        return Err(DmacError::Config {
            field: "repeats".into(),
            reason: "must be at least 1".into(),
        });
    }
    let cfg = args.flags.resolve(TrainConfig::default())?;
    let data = load_dataset(&args.data)?;
    let seeds: Vec<u64> = (0..args.repeats as u64).map(|r| cfg.seed + r).collect();
    let results: Vec<Result<TrainResult>> = with_worker_pool(|| {
        seeds
            .par_iter()
            .map(|&seed| train(&data, &TrainConfig { seed, ..cfg.clone() }))
            .collect()
    })?;
    let results: Vec<TrainResult> = results.into_iter().collect::<Result<_>>()?;

    fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::new();
    for (r, result) in results.iter().enumerate() {
        let dir = if args.repeats == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("run{r}"))
        };
        outputs.extend(write_artifacts(&dir, result)?);
    }
    if let Some(path) = &args.dump_graph {
        outputs.extend(dump_graphs(path, &results[0])?);
    }
    let runs: Vec<RunRecord> = seeds
        .iter()
        .zip(&results)
        .map(|(&s, r)| RunRecord::from_result(s, r))
        .collect();
    let report_path = args.out.join(REPORT_FILE);
    outputs.push(report_path.clone());
    let report = RunReport {
        nmi_normalization: NMI_NORMALIZATION.into(),
        config: cfg,
        dataset: DatasetInfo::of(&args.data, &data),
        mean_metrics: mean_metrics(&runs.iter().map(|r| r.metrics).collect::<Vec<_>>()),
        runs,
        outputs,
    };
    report.write(&report_path)?;
    Ok(report)
}

/// One row of `grid.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub alpha: f64,
    pub beta: f64,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub final_loss: f64,
}

impl std::fmt::Display for GridRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "alpha {:<8} beta {:<8}", self.alpha, self.beta)?;
        if let (Some(acc), Some(nmi)) = (self.acc, self.nmi) {
            write!(f, " ACC {acc:.4} NMI {nmi:.4}")?;
        }
        write!(f, " L {:.4}", self.final_loss)
    }
}

/// Rows come best first.
pub fn cmd_grid(args: &GridArgs) -> Result<Vec<GridRow>> {
    let mut cfg = args.flags.resolve(TrainConfig::default())?;
    if let Some(g) = &args.alpha_grid {
        cfg.alpha_grid = g.clone();
    }
    if let Some(g) = &args.beta_grid {
        cfg.beta_grid = g.clone();
    }
    cfg.validate()?;
    let data = load_dataset(&args.data)?;
    let rows: Vec<GridRow> = grid_search(&data, &cfg)?
        .iter()
        .map(|cell| GridRow {
            alpha: cell.alpha,
            beta: cell.beta,
            acc: cell.result.metrics.map(|m| m.acc),
            nmi: cell.result.metrics.map(|m| m.nmi),
            final_loss: cell.result.final_loss(),
        })
        .collect();
    fs::create_dir_all(&args.out)?;
    let mut w = csv::Writer::from_path(args.out.join(GRID_FILE))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(rows)
}

/// One row of the scaling table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub setup_seconds: f64,
    /// Absent when no epochs ran.
    pub seconds_per_epoch: Option<f64>,
}

/// Mean per-epoch time of one run, skipping the first epoch when others exist.
fn warm_epoch_seconds(r: &TrainResult) -> Option<f64> {
    let t = &r.epoch_seconds;
    let warm = if t.len() > 1 { &t[1..] } else { &t[..] };
    (!warm.is_empty()).then(|| warm.iter().sum::<f64>() / warm.len() as f64)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    let base = TrainConfig {
        anchors: Some(BENCH_ANCHORS),
        epochs: BENCH_EPOCHS,
        ..TrainConfig::default()
    };
    let flags = TrainFlags { epochs: None, ..args.flags.clone() };
    let mut cfg = flags.resolve(base)?;
    if let Some(e) = args.flags.epochs {
        cfg.epochs = e;
    }
    let repeats = args.repeats.max(1);
    let mut rows = Vec::with_capacity(args.ns.len());
    for &n in &args.ns {
        let spec = SyntheticSpec::blobs(n, args.views, args.clusters, cfg.seed);
        let (data, _) = generate_synthetic(&spec)?.normalized();
        let mut setup = 0.0;
        let mut per_epoch = Vec::new();
        for r in 0..repeats as u64 {
            let seed = cfg.seed + r;
            if cfg.epochs == 0 {
                let start = Instant::now();
                let model = Model::new(&data.dims(), data.c(), &cfg, seed);
                setup += start.elapsed().as_secs_f64();
                drop(model);
                continue;
            }
            let result = train(&data, &TrainConfig { seed, ..cfg.clone() })?;
            setup += result.setup_seconds;
            per_epoch.extend(warm_epoch_seconds(&result));
        }
        let row = BenchRow {
            n,
            m: cfg.anchor_count_for(n, args.clusters)?,
            setup_seconds: setup / repeats as f64,
            seconds_per_epoch: (!per_epoch.is_empty())
                .then(|| per_epoch.iter().sum::<f64>() / per_epoch.len() as f64),
        };
        log::info!("n = {n}: {row:?}");
        rows.push(row);
    }
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(rows)
}

/// Least-squares slope of `ln t` against `ln n`.
pub fn scaling_exponent(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, t)| t.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Metrics> {
    let (truth, clusters) = match (&args.truth, &args.data) {
        (Some(path), _) => {
            let t = read_labels(path)?;
            let c = t.iter().max().map_or(0, |&x| x + 1);
            (t, c)
        }
        (None, Some(dir)) => {
            let data = load_dataset(dir)?;
            let t = data.labels().map(<[usize]>::to_vec).ok_or_else(|| {
                DmacError::Argument(format!("{} has no labels", dir.display()))
            })?;
            (t, data.c())
        }
        (None, None) => {
            return Err(DmacError::Argument("need --data or --truth".into()));
        }
    };
    let pred = match (&args.pred, &args.embedding) {
        (Some(path), _) => read_labels(path)?,
        (None, Some(path)) => kmeans(&read_matrix(path)?, clusters, args.seed, 10)?.labels,
        (None, None) => {
            return Err(DmacError::Argument("need --pred or --embedding".into()));
        }
    };
    let metrics = Metrics {
        acc: accuracy(&pred, &truth)?,
        nmi: nmi(&pred, &truth)?,
    };
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&metrics)? + "\n")?;
    }
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("dmac").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"alpha": 5.0, "epochs": 7, "k_neighbors": 3}"#).unwrap();
        let cli = parse(&["train", "--data", "d", "--out", "o", "--config", path.to_str().unwrap(), "--epochs", "9"]);
        let Command::Train(a) = cli.command else { panic!() };
        let cfg = a.flags.resolve(TrainConfig::default()).unwrap();
        assert_eq!(cfg.alpha, 5.0);
        assert_eq!(cfg.epochs, 9);
        assert_eq!(cfg.k_neighbors, 3);
        assert_eq!(cfg.beta, TrainConfig::default().beta);
    }

    #[test]
    fn invalid_flag_value_names_the_field() {
        let flags = TrainFlags { epochs: Some(0), ..TrainFlags::default() };
        let err = flags.resolve(TrainConfig::default()).unwrap_err();
        assert!(matches!(err, DmacError::Config { ref field, .. } if field == "epochs"), "{err}");
        let flags = TrainFlags { alpha: Some(-1.0), ..TrainFlags::default() };
        assert!(flags.resolve(TrainConfig::default()).is_err());
    }

    #[test]
    fn ablation_flags_are_echoed() {
        let cli = parse(&["grid", "--data", "d", "--out", "o", "--wo-pd", "--wo-cm", "--alpha-grid", "0.1,1"]);
        let Command::Grid(a) = cli.command else { panic!() };
        let cfg = a.flags.resolve(TrainConfig::default()).unwrap();
        assert!(cfg.disable_perturbation && cfg.disable_consistency);
        assert_eq!(a.alpha_grid, Some(vec![0.1, 1.0]));
    }

    #[test]
    fn scaling_exponent_of_power_laws() {
        let pts: Vec<(usize, f64)> = [1000, 2000, 4000].iter().map(|&n| (n, 3e-7 * (n as f64).powf(1.2))).collect();
        assert!((scaling_exponent(&pts) - 1.2).abs() < 1e-12);
        let flat = [(10, 2.0), (100, 2.0)];
        assert!(scaling_exponent(&flat).abs() < 1e-15);
    }

    #[test]
    fn mean_metrics_needs_every_run_labeled() {
        let a = Metrics { acc: 1.0, nmi: 0.5 };
        let b = Metrics { acc: 0.5, nmi: 1.0 };
        assert_eq!(mean_metrics(&[Some(a), Some(b)]), Some(Metrics { acc: 0.75, nmi: 0.75 }));
        assert_eq!(mean_metrics(&[Some(a), None]), None);
        assert_eq!(mean_metrics(&[]), None);
    }

    #[test]
    fn synth_is_byte_identical_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let args = |out: &str| SynthArgs {
            out: dir.path().join(out),
            n: 60,
            views: 2,
            clusters: 3,
            seed: 7,
            spread: 10.0,
            noise: 1.0,
            format: FormatArg::Csv,
            raw: false,
        };
        cmd_synth(&args("a")).unwrap();
        cmd_synth(&args("b")).unwrap();
        for f in ["manifest.json", "view0.csv", "view1.csv", "labels.txt"] {
            assert_eq!(
                fs::read(dir.path().join("a").join(f)).unwrap(),
                fs::read(dir.path().join("b").join(f)).unwrap(),
                "{f}"
            );
        }
        let back = load_dataset(&dir.path().join("a")).unwrap();
        assert_eq!((back.n(), back.v(), back.c()), (60, 2, 3));
    }

    #[test]
    fn zero_noise_duplicates_rows_within_clusters() {
        let dir = tempfile::tempdir().unwrap();
        let data = cmd_synth(&SynthArgs {
            out: dir.path().join("d"),
            n: 30,
            views: 1,
            clusters: 3,
            seed: 1,
            spread: 10.0,
            noise: 0.0,
            format: FormatArg::Dmx,
            raw: true,
        })
        .unwrap();
        let labels = data.labels().unwrap();
        let x = &data.views()[0];
        for i in 0..30 {
            for j in 0..30 {
                if labels[i] == labels[j] {
                    assert_eq!(x.row(i), x.row(j));
                }
            }
        }
    }

    #[test]
    fn bench_without_epochs_reports_setup_only() {
        let args = BenchArgs {
            ns: vec![40, 80],
            flags: TrainFlags { epochs: Some(0), anchors: Some(6), ..TrainFlags::default() },
            views: 2,
            clusters: 3,
            repeats: 1,
            out: Some(tempfile::NamedTempFile::new().unwrap().path().to_path_buf()),
        };
        let rows = cmd_bench(&args).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.seconds_per_epoch.is_none() && r.m == 6));
    }

    #[test]
    fn eval_scores_label_files() {
        let dir = tempfile::tempdir().unwrap();
        let truth = dir.path().join("truth.txt");
        let pred = dir.path().join("pred.txt");
        write_labels(&truth, &[0, 0, 1, 1, 2, 2]).unwrap();
        write_labels(&pred, &[2, 2, 0, 0, 1, 1]).unwrap();
        let m = cmd_eval(&EvalArgs {
            data: None,
            truth: Some(truth),
            pred: Some(pred),
            embedding: None,
            seed: 0,
            out: None,
        })
        .unwrap();
        assert_eq!(m.acc, 1.0);
        assert!((m.nmi - 1.0).abs() < 1e-12);
    }
}
