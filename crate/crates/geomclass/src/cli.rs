//! The `geomclass` command line.
//!
//! Every subcommand writes into one output directory (`--out-dir`, default
//! `runs/<timestamp>-seed<seed>`) and leaves a `run.json` there with the
//! argument vector and every effective parameter. Exit codes: 0 success,
//! 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use geomclass_core::datagen::{
    self, generate, generate_hard_pair, HardPair, LabeledGeometry, Placement, ShapeClass,
};
use geomclass_core::efd::{efd, reconstruct};
use geomclass_core::encoding::{bin_and_pad, bin_lengths, DEFAULT_MAX_POINTS};
use geomclass_core::harness::{
    accuracy, confusion, grid_search, majority_baseline, split, split_stratified, ConfusionMatrix,
    FittedShallow, GridOptions, GridSpec, Score, TaskPreset,
};
use geomclass_core::models::{
    build_cnn, build_rnn, repeated_runs, train, DeepModel, Network, RunResult, TrainConfig,
};
use geomclass_core::shallow::{FitOptions, Hyper, ModelKind};
use geomclass_core::{Geometry, Ring};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::benchmark::{load_benchmark, BenchmarkAdapter};
use crate::dataset::{read_json, write_json, DataError, Dataset, SPLIT_RULE, STRATIFIED_RULE};
use crate::modelfile::{ModelFile, SavedModel};
use crate::parallel::Parallel;
use crate::pipeline::{self, EvalPadding};
use crate::report;
use crate::wkt::{parse_wkt, to_wkt};

pub const RUN_FILE: &str = "run.json";
pub const RESULT_FILE: &str = "result.json";
pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "geomclass",
    version,
    about = "Shape classification of polygon geometries"
)]
pub struct Cli {
    /// Seed for generation, splits, cross validation and initialization.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory [default: runs/<timestamp>-seed<seed>]
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Write the normalized vertex-sequence form of a dataset.
    Encode(EncodeArgs),
    /// Write EFD feature tables of every split.
    Features(FeaturesArgs),
    /// Reconstruct one outline from its EFD at several orders.
    Reconstruct(ReconstructArgs),
    /// Train one shallow model with fixed hyperparameters.
    TrainShallow(TrainShallowArgs),
    /// Cross-validated grid search of a shallow model.
    GridSearch(GridSearchArgs),
    /// Train a CNN or bidirectional LSTM, optionally repeated.
    TrainDeep(TrainDeepArgs),
    /// Evaluate a saved model on a dataset split.
    Evaluate(EvaluateArgs),
    /// Collect result files into a comparison table.
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Encode(_) => "encode",
            Command::Features(_) => "features",
            Command::Reconstruct(_) => "reconstruct",
            Command::TrainShallow(_) => "train-shallow",
            Command::GridSearch(_) => "grid-search",
            Command::TrainDeep(_) => "train-deep",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
        }
    }
}

/// Integers as `a:b` (inclusive), `a,b,c` or a single value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct IntList(pub Vec<usize>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        if let Some((a, b)) = s.split_once(':') {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                return Err(format!("empty range {s}"));
            }
            return Ok(IntList((a..=b).collect()));
        }
        s.split(',').map(num).collect::<Result<_, _>>().map(IntList)
    }
}

/// Comma separated floats.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<Result<_, _>>()
            .map(FloatList)
    }
}

/// A float interval `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval(pub f64, pub f64);

impl FromStr for Interval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
        let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let (a, b) = (p(a)?, p(b)?);
        if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
            return Err(format!("need 0 < lo < hi, got {s:?}"));
        }
        Ok(Interval(a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Triangle, rectangle, ellipse, L-shape and star.
    Shapes,
    /// Two rectangle classes with overlapping aspect ratios.
    HardPair,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "shapes")]
    pub kind: SynthKind,
    /// Number of shape classes, taken in the order triangle, rectangle,
    /// ellipse64, lshape, star5.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..=5))]
    pub classes: u64,
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    /// Jitter as a fraction of the shape diameter.
    #[arg(long, default_value_t = Placement::default().jitter)]
    pub jitter: f64,
    /// Aspect-ratio range of the first hard-pair class.
    #[arg(long, default_value = "1.0:2.0")]
    pub aspect_a: Interval,
    /// Aspect-ratio range of the second hard-pair class.
    #[arg(long, default_value = "1.7:2.7")]
    pub aspect_b: Interval,
    /// Give every split the class proportions of the whole dataset.
    #[arg(long)]
    pub stratify: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Dataset directory: native layout, or GeoJSON/CSV files.
    #[arg(long)]
    pub data: PathBuf,
    /// Label property or column of GeoJSON/CSV files.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// WKT column of CSV files.
    #[arg(long, default_value = "wkt")]
    pub geometry_column: String,
    /// Identifier column of CSV files.
    #[arg(long, default_value = "id")]
    pub id_column: String,
    /// Task name in result files [default: dataset directory name]
    #[arg(long)]
    pub task: Option<String>,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<Dataset, CliError> {
        let adapter = BenchmarkAdapter {
            label: self.label_column.clone(),
            geometry: self.geometry_column.clone(),
            id: Some(self.id_column.clone()),
            split_seed: seed,
        };
        Ok(load_benchmark(&self.data, Some(&adapter))?)
    }

    fn task_name(&self) -> String {
        self.task.clone().unwrap_or_else(|| {
            self.data
                .canonicalize()
                .unwrap_or_else(|_| self.data.clone())
                .file_name()
                .map_or_else(|| "task".to_string(), |n| n.to_string_lossy().into_owned())
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Stored vertex budget per geometry; larger ones are simplified.
    #[arg(long, default_value_t = DEFAULT_MAX_POINTS)]
    pub max_points: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 24)]
    pub order: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ReconstructArgs {
    /// Outline as WKT.
    #[arg(long, conflicts_with_all = ["data", "id"], required_unless_present = "data")]
    pub wkt: Option<String>,
    /// Dataset holding the outline.
    #[arg(long, requires = "id")]
    pub data: Option<PathBuf>,
    /// Identifier of the outline in `--data`.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, default_value = "1:4")]
    pub orders: IntList,
    /// Points per reconstructed outline.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Knn,
    Logreg,
    Dtree,
    #[value(alias = "svm")]
    SvmRbf,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Knn => ModelKind::Knn,
            ModelArg::Logreg => ModelKind::Logreg,
            ModelArg::Dtree => ModelKind::Dtree,
            ModelArg::SvmRbf => ModelKind::SvmRbf,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainShallowArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// EFD order of the features.
    #[arg(long, default_value_t = 8)]
    pub order: usize,
    /// Neighbours (knn).
    #[arg(long)]
    pub k: Option<usize>,
    /// Inverse regularization (logreg, svm-rbf).
    #[arg(long)]
    pub c: Option<f64>,
    /// Kernel width (svm-rbf).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Maximum depth (dtree).
    #[arg(long)]
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetArg {
    Neighbourhoods,
    Buildings,
    Archaeology,
}

impl From<PresetArg> for TaskPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Neighbourhoods => TaskPreset::Neighbourhoods,
            PresetArg::Buildings => TaskPreset::Buildings,
            PresetArg::Archaeology => TaskPreset::Archaeology,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GridSearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Search ranges to start from.
    #[arg(long, value_enum, default_value = "neighbourhoods")]
    pub preset: PresetArg,
    /// EFD orders, e.g. `0,1,2,3,4`.
    #[arg(long)]
    pub orders: Option<IntList>,
    /// Tree depths, e.g. `4:9`.
    #[arg(long)]
    pub depths: Option<IntList>,
    /// Neighbour counts, e.g. `21:30`.
    #[arg(long)]
    pub ks: Option<IntList>,
    /// C values, e.g. `0.01,0.1,1`.
    #[arg(long)]
    pub cs: Option<FloatList>,
    /// Kernel widths.
    #[arg(long)]
    pub gammas: Option<FloatList>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Training rows used by the knn and svm-rbf searches.
    #[arg(long, default_value_t = GridOptions::default().subset_cap)]
    pub subset_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Cnn,
    Rnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaddingArg {
    TrainBins,
    OwnBins,
}

impl From<PaddingArg> for EvalPadding {
    fn from(p: PaddingArg) -> Self {
        match p {
            PaddingArg::TrainBins => EvalPadding::TrainBins,
            PaddingArg::OwnBins => EvalPadding::OwnBins,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainDeepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub arch: Arch,
    /// Independently seeded training runs (seeds `--seed` upwards).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeats: u64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    pub patience: usize,
    #[arg(long, default_value_t = TrainConfig::default().lr)]
    pub lr: f64,
    /// Sequences per length bin [default: eight batches]
    #[arg(long)]
    pub n_bin: Option<usize>,
    /// Exclude padded steps from the CNN's average pool.
    #[arg(long)]
    pub mask_padding: bool,
    /// Keep the initial batches instead of re-dealing equal-length bins
    /// every epoch.
    #[arg(long)]
    pub no_redeal: bool,
    /// Padding of validation and test batches.
    #[arg(long, value_enum, default_value = "train-bins")]
    pub eval_padding: PaddingArg,
    /// Vertex budget when encoding raw data.
    #[arg(long, default_value_t = DEFAULT_MAX_POINTS)]
    pub max_points: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Saved model file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_parser = ["train", "val", "test"], default_value = "test")]
    pub split: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Result files or run directories holding `result.json`.
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(DataError::Invalid(e.to_string()))
}

/// Written by every training and evaluation run, read by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub task: String,
    /// Row of the comparison table.
    pub method: String,
    pub score: Score,
    /// Majority-class baseline on the same split.
    pub majority: f64,
    pub split: String,
}

struct Outcome {
    effective: Value,
    outputs: Vec<String>,
    summary: String,
}

/// Parses `argv`, runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    let argv: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(&cli, &argv) {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(format!(
            "{}-seed{}",
            chrono::Local::now().format("%Y%m%dT%H%M%S"),
            cli.seed
        ))
    })
}

fn execute(cli: &Cli, argv: &[String]) -> Result<String, CliError> {
    let dir = out_dir(cli);
    fs::create_dir_all(&dir).map_err(crate::dataset::io_err(&dir))?;
    let exec = Parallel::from_env();
    let mut manifest = json!({
        "argv": argv,
        "command": cli.command.name(),
        "params": cli,
        "out_dir": dir,
        "seed": cli.seed,
        "threads": exec.threads(),
        "version": env!("CARGO_PKG_VERSION"),
        "started": chrono::Local::now().to_rfc3339(),
    });
    let run_path = dir.join(RUN_FILE);
    write_json(&run_path, &manifest)?;
    let outcome = match &cli.command {
        Command::Synth(a) => synth(cli, a, &dir, &exec),
        Command::Encode(a) => encode(cli, a, &dir),
        Command::Features(a) => features(cli, a, &dir, &exec),
        Command::Reconstruct(a) => reconstruct_cmd(cli, a, &dir),
        Command::TrainShallow(a) => train_shallow(cli, a, &dir, &exec),
        Command::GridSearch(a) => grid(cli, a, &dir, &exec),
        Command::TrainDeep(a) => train_deep(cli, a, &dir, &exec),
        Command::Evaluate(a) => evaluate_cmd(cli, a, &dir, &exec),
        Command::Report(a) => report_cmd(a, &dir),
    }?;
    manifest["effective"] = outcome.effective;
    manifest["outputs"] = json!(outcome.outputs);
    manifest["finished"] = json!(chrono::Local::now().to_rfc3339());
    write_json(&run_path, &manifest)?;
    Ok(outcome.summary)
}

fn synth(cli: &Cli, a: &SynthArgs, dir: &Path, exec: &Parallel) -> Result<Outcome, CliError> {
    if a.per_class == 0 {
        return Err(CliError::Usage("--per-class must be at least 1".into()));
    }
    let (items, class_names, generator): (Vec<LabeledGeometry>, Vec<String>, Value) = match a.kind {
        SynthKind::Shapes => {
            let classes = &ShapeClass::ALL[..a.classes as usize];
            let placement = Placement {
                jitter: a.jitter,
                ..Placement::default()
            };
            let names = classes.iter().map(|c| c.name().to_string()).collect();
            (
                generate(classes, a.per_class, cli.seed, &placement, exec),
                names,
                json!({"kind": "shapes", "classes": classes, "per_class": a.per_class, "placement": placement}),
            )
        }
        SynthKind::HardPair => {
            let pair = HardPair {
                a: (a.aspect_a.0, a.aspect_a.1),
                b: (a.aspect_b.0, a.aspect_b.1),
            };
            (
                generate_hard_pair(&pair, a.per_class, cli.seed, exec),
                vec!["aspect_a".into(), "aspect_b".into()],
                json!({"kind": "hard_pair", "pair": pair, "per_class": a.per_class, "bayes_accuracy": pair.bayes_accuracy()}),
            )
        }
    };
    let sp = if a.stratify {
        let labels: Vec<usize> = items.iter().map(|g| g.label).collect();
        split_stratified(&labels, cli.seed)
    } else {
        split(items.len(), cli.seed)
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut ds = Dataset::from_split(
        &items,
        &sp,
        class_names,
        Some(cli.seed),
        json!({"generator": generator, "prng": datagen::PRNG_NAME}),
    );
    if a.stratify {
        ds.manifest.split_rule = format!("{STRATIFIED_RULE}; {SPLIT_RULE}");
    }
    ds.save(dir)?;
    let c = &ds.manifest.counts;
    Ok(Outcome {
        effective: generator,
        outputs: vec![
            "manifest.json".into(),
            "train.ndjson".into(),
            "val.ndjson".into(),
            "test.ndjson".into(),
        ],
        summary: format!(
            "wrote {} geometries ({}/{}/{}) to {}",
            c.total(),
            c.train,
            c.val,
            c.test,
            dir.display()
        ),
    })
}

fn encode(cli: &Cli, a: &EncodeArgs, dir: &Path) -> Result<Outcome, CliError> {
    if a.max_points < 4 {
        return Err(CliError::Usage("--max-points must be at least 4".into()));
    }
    let ds = a.data.load(cli.seed)?;
    let enc = pipeline::encode_dataset(&ds, a.max_points)?;
    enc.save(dir)?;
    let s = enc.manifest.scale_factor.unwrap_or(f64::NAN);
    Ok(Outcome {
        effective: json!({"scale_factor": s, "max_points": a.max_points}),
        outputs: vec![
            "manifest.json".into(),
            "train.ndjson".into(),
            "val.ndjson".into(),
            "test.ndjson".into(),
        ],
        summary: format!(
            "encoded {} geometries with s = {s}",
            enc.manifest.counts.total()
        ),
    })
}

fn features(cli: &Cli, a: &FeaturesArgs, dir: &Path, exec: &Parallel) -> Result<Outcome, CliError> {
    let ds = a.data.load(cli.seed)?;
    let mut outputs = Vec::new();
    for name in crate::dataset::SPLITS {
        let (table, ids, labels) = pipeline::feature_table(&ds, name, a.order, exec)?;
        let file = format!("features_{name}.csv");
        report::write_features(
            &dir.join(&file),
            &table.layout,
            &ids,
            &table.matrix,
            &labels,
        )?;
        outputs.push(file);
    }
    Ok(Outcome {
        effective: json!({"order": a.order, "columns": geomclass_core::efd::FeatureLayout::new(a.order).len()}),
        outputs,
        summary: format!(
            "wrote order-{} features for {} geometries",
            a.order,
            ds.manifest.counts.total()
        ),
    })
}

fn find_geometry(cli: &Cli, data: &Path, id: &str) -> Result<Geometry, CliError> {
    let ds = DataArgs {
        data: data.to_path_buf(),
        label_column: "label".into(),
        geometry_column: "wkt".into(),
        id_column: "id".into(),
        task: None,
    }
    .load(cli.seed)?;
    for name in crate::dataset::SPLITS {
        if let Some(g) = pipeline::geometries(&ds, name)?
            .into_iter()
            .find(|g| g.geometry.id == id)
        {
            return Ok(g.geometry);
        }
    }
    Err(data_err(format!(
        "no geometry {id:?} in {}",
        data.display()
    )))
}

fn reconstruct_cmd(cli: &Cli, a: &ReconstructArgs, dir: &Path) -> Result<Outcome, CliError> {
    let g = match (&a.wkt, &a.data, &a.id) {
        (Some(w), _, _) => parse_wkt("input", w).map_err(data_err)?,
        (None, Some(d), Some(id)) => find_geometry(cli, d, id)?,
        _ => return Err(CliError::Usage("give --wkt or --data with --id".into())),
    };
    if a.samples < 3 {
        return Err(CliError::Usage("--samples must be at least 3".into()));
    }
    let ring = &g.rings()[g.largest_ring()];
    let mut recs = vec![vec!["order".to_string(), "wkt".to_string()]];
    for &order in &a.orders.0 {
        let c = efd(ring, order).map_err(data_err)?;
        let outline = Ring::from_open(reconstruct(&c, a.samples)).map_err(data_err)?;
        recs.push(vec![
            order.to_string(),
            to_wkt(&Geometry::polygon(g.id.clone(), outline)),
        ]);
    }
    let path = dir.join("reconstruction.csv");
    let mut w = csv::Writer::from_path(&path).map_err(data_err)?;
    for r in &recs {
        w.write_record(r).map_err(data_err)?;
    }
    w.flush().map_err(crate::dataset::io_err(&path))?;
    fs::write(dir.join("source.wkt"), to_wkt(&g) + "\n").map_err(crate::dataset::io_err(dir))?;
    Ok(Outcome {
        effective: json!({"id": g.id, "orders": a.orders, "samples": a.samples}),
        outputs: vec!["reconstruction.csv".into(), "source.wkt".into()],
        summary: format!("reconstructed {} at orders {:?}", g.id, a.orders.0),
    })
}

fn labels_of(ds: &Dataset, split: &str) -> Vec<usize> {
    ds.split(split).map(|r| r.labels()).unwrap_or_default()
}

fn write_result(
    dir: &Path,
    ds: &Dataset,
    task: String,
    method: &str,
    score: Score,
    split: &str,
    cm: Option<&ConfusionMatrix>,
) -> Result<Vec<String>, CliError> {
    let majority =
        majority_baseline(&labels_of(ds, "train"), &labels_of(ds, split)).map_err(data_err)?;
    let result = ResultFile {
        task,
        method: method.to_string(),
        score,
        majority,
        split: split.to_string(),
    };
    write_json(&dir.join(RESULT_FILE), &result)?;
    let mut outputs = vec![RESULT_FILE.to_string()];
    if let Some(cm) = cm {
        let file = format!("confusion_{split}.csv");
        report::write_confusion(&dir.join(&file), cm, &ds.manifest.class_names)?;
        outputs.push(file);
    }
    Ok(outputs)
}

fn shallow_outputs(
    dir: &Path,
    ds: &Dataset,
    data: &DataArgs,
    fitted: FittedShallow,
    exec: &Parallel,
) -> Result<(Vec<String>, f64), CliError> {
    let (test, _, truth) = pipeline::feature_table(ds, "test", fitted.order, exec)?;
    let pred = fitted.predict(&test).map_err(data_err)?;
    let cm = confusion(&pred, &truth, ds.num_classes()).map_err(data_err)?;
    let acc = cm.accuracy();
    let method = fitted.hyper.kind().display_name();
    ModelFile::new(ds.manifest.class_names.clone(), SavedModel::Shallow(fitted))
        .save(&dir.join(MODEL_FILE))?;
    let mut outputs = vec![MODEL_FILE.to_string()];
    outputs.extend(write_result(
        dir,
        ds,
        data.task_name(),
        method,
        Score::Single(acc),
        "test",
        Some(&cm),
    )?);
    Ok((outputs, acc))
}

fn train_shallow(
    cli: &Cli,
    a: &TrainShallowArgs,
    dir: &Path,
    exec: &Parallel,
) -> Result<Outcome, CliError> {
    let missing = |flag: &str| {
        CliError::Usage(format!(
            "--model {} needs {flag}",
            ModelKind::from(a.model).name()
        ))
    };
    let hyper = match a.model {
        ModelArg::Knn => Hyper::Knn {
            k: a.k.ok_or_else(|| missing("--k"))?,
        },
        ModelArg::Logreg => Hyper::Logreg {
            c: a.c.ok_or_else(|| missing("--c"))?,
        },
        ModelArg::Dtree => Hyper::Dtree {
            max_depth: a.max_depth.ok_or_else(|| missing("--max-depth"))?,
        },
        ModelArg::SvmRbf => Hyper::SvmRbf {
            c: a.c.ok_or_else(|| missing("--c"))?,
            gamma: a.gamma.ok_or_else(|| missing("--gamma"))?,
        },
    };
    let ds = a.data.load(cli.seed)?;
    let (train, _, labels) = pipeline::feature_table(&ds, "train", a.order, exec)?;
    let opts = FitOptions::default();
    let fitted = FittedShallow::fit(&train, &labels, a.order, hyper, &opts).map_err(data_err)?;
    let (outputs, acc) = shallow_outputs(dir, &ds, &a.data, fitted, exec)?;
    Ok(Outcome {
        effective: json!({"order": a.order, "hyper": hyper, "fit": opts}),
        outputs,
        summary: format!(
            "{}: test accuracy {acc:.3}",
            ModelKind::from(a.model).display_name()
        ),
    })
}

fn grid(cli: &Cli, a: &GridSearchArgs, dir: &Path, exec: &Parallel) -> Result<Outcome, CliError> {
    let kind = ModelKind::from(a.model);
    let mut spec = GridSpec::preset(a.preset.into());
    if let Some(o) = &a.orders {
        spec.orders = o.0.clone();
    }
    if let Some(d) = &a.depths {
        spec.dtree_depth = d.0.clone();
    }
    if let Some(k) = &a.ks {
        spec.knn_k = k.0.clone();
    }
    if let Some(c) = &a.cs {
        spec.logreg_c = c.0.clone();
        spec.svm_c = c.0.clone();
    }
    if let Some(g) = &a.gammas {
        spec.svm_gamma = g.0.clone();
    }
    if a.folds < 2 {
        return Err(CliError::Usage("--folds must be at least 2".into()));
    }
    if spec.hypers(kind).is_empty() || spec.orders.is_empty() {
        return Err(CliError::Usage("empty search grid".into()));
    }
    let opts = GridOptions {
        folds: a.folds,
        subset_cap: a.subset_cap,
        seed: cli.seed,
        fit: FitOptions::default(),
    };
    let ds = a.data.load(cli.seed)?;
    let (train, _, labels) = pipeline::feature_table(&ds, "train", spec.max_order(), exec)?;
    let result = grid_search(kind, &train, &labels, &spec, &opts, exec).map_err(data_err)?;
    report::write_cv_table(&dir.join("cv_table.csv"), &result.table)?;
    let best = result.best_row().clone();
    let (mut outputs, acc) = shallow_outputs(dir, &ds, &a.data, result.fitted, exec)?;
    outputs.insert(0, "cv_table.csv".into());
    Ok(Outcome {
        effective: json!({"grid": spec, "options": opts, "best": best, "cv_rows_used": result.cv_rows_used}),
        outputs,
        summary: format!(
            "{}: best order {} {:?} cv {:.3}, test accuracy {acc:.3}",
            kind.display_name(),
            best.order,
            best.hyper,
            best.mean
        ),
    })
}

struct DeepRuns {
    runs: Vec<RunResult>,
    score: Score,
    best: DeepModel,
}

fn deep_runs<N, B>(
    build: B,
    wrap: fn(N) -> DeepModel,
    batches: [&[geomclass_core::encoding::Batch]; 3],
    cfg: &TrainConfig,
    repeats: usize,
    exec: &Parallel,
) -> Result<DeepRuns, CliError>
where
    N: Network,
    B: Fn(u64) -> Result<N, geomclass_core::models::ModelError> + Sync + Send,
{
    let [tr, va, te] = batches;
    if repeats == 1 {
        let (model, history) =
            train(build(cfg.seed).map_err(data_err)?, tr, va, cfg).map_err(data_err)?;
        let test =
            geomclass_core::models::evaluate(&model, te, cfg.mask_padding).map_err(data_err)?;
        return Ok(DeepRuns {
            score: Score::Single(test.accuracy),
            runs: vec![RunResult {
                seed: cfg.seed,
                test_accuracy: test.accuracy,
                history,
            }],
            best: wrap(model),
        });
    }
    let r = repeated_runs(build, tr, va, te, cfg, repeats, exec).map_err(data_err)?;
    let mut pick = 0;
    for (i, run) in r.runs.iter().enumerate() {
        if run.history.best_val_accuracy > r.runs[pick].history.best_val_accuracy {
            pick = i;
        }
    }
    let best = wrap(r.models.into_iter().nth(pick).expect("one model per run"));
    Ok(DeepRuns {
        runs: r.runs,
        score: r.score,
        best,
    })
}

fn train_deep(
    cli: &Cli,
    a: &TrainDeepArgs,
    dir: &Path,
    exec: &Parallel,
) -> Result<Outcome, CliError> {
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: cli.seed,
        lr: a.lr,
        n_bin: a.n_bin,
        mask_padding: a.mask_padding,
        redeal: !a.no_redeal,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ds = a.data.load(cli.seed)?;
    let s = pipeline::scale_factor(&ds)?;
    let max_points = match ds.manifest.form {
        crate::dataset::RecordForm::Encoded => ds.manifest.max_points,
        crate::dataset::RecordForm::Raw => a.max_points,
    };
    let seqs = |split| pipeline::sequences(&ds, split, s, max_points);
    let trb = bin_and_pad(&seqs("train")?, cfg.batch_size, cfg.n_bin()).map_err(data_err)?;
    let bins = bin_lengths(&trb);
    let padding = EvalPadding::from(a.eval_padding);
    let vab = pipeline::eval_batches(&seqs("val")?, cfg.batch_size, cfg.n_bin(), padding, &bins)?;
    let teb = pipeline::eval_batches(&seqs("test")?, cfg.batch_size, cfg.n_bin(), padding, &bins)?;
    let k = ds.num_classes();
    let repeats = a.repeats as usize;
    let batches = [&trb[..], &vab[..], &teb[..]];
    let out = match a.arch {
        Arch::Cnn => deep_runs(
            |seed| build_cnn(k, seed),
            DeepModel::Cnn,
            batches,
            &cfg,
            repeats,
            exec,
        )?,
        Arch::Rnn => deep_runs(
            |seed| build_rnn(k, seed),
            DeepModel::Rnn,
            batches,
            &cfg,
            repeats,
            exec,
        )?,
    };
    let method = match a.arch {
        Arch::Cnn => "CNN",
        Arch::Rnn => "RNN",
    };
    let eval = out
        .best
        .evaluate(&teb, cfg.mask_padding)
        .map_err(data_err)?;
    let cm = confusion(&eval.predictions, &eval.labels, k).map_err(data_err)?;
    write_json(&dir.join("runs.json"), &out.runs)?;
    ModelFile::new(
        ds.manifest.class_names.clone(),
        SavedModel::Deep {
            network: out.best,
            scale_factor: s.get(),
            max_points,
            mask_padding: cfg.mask_padding,
            train_bins: if padding == EvalPadding::TrainBins {
                bins.clone()
            } else {
                Vec::new()
            },
        },
    )
    .save(&dir.join(MODEL_FILE))?;
    let mut outputs = vec!["runs.json".to_string(), MODEL_FILE.to_string()];
    outputs.extend(write_result(
        dir,
        &ds,
        a.data.task_name(),
        method,
        out.score,
        "test",
        Some(&cm),
    )?);
    Ok(Outcome {
        effective: json!({"train": cfg, "n_bin": cfg.n_bin(), "eval_padding": padding, "train_bins": bins,
            "scale_factor": s.get(), "max_points": max_points, "repeats": repeats}),
        outputs,
        summary: format!("{method}: {}", out.score.format()),
    })
}

fn evaluate_cmd(
    cli: &Cli,
    a: &EvaluateArgs,
    dir: &Path,
    exec: &Parallel,
) -> Result<Outcome, CliError> {
    let file = ModelFile::load(&a.model)?;
    let ds = a.data.load(cli.seed)?;
    if file.class_names != ds.manifest.class_names {
        return Err(data_err(format!(
            "model classes {:?} differ from dataset classes {:?}",
            file.class_names, ds.manifest.class_names
        )));
    }
    let k = ds.num_classes();
    let (method, ids, truth, pred) = match &file.model {
        SavedModel::Shallow(f) => {
            let (table, ids, truth) = pipeline::feature_table(&ds, &a.split, f.order, exec)?;
            (
                f.hyper.kind().display_name(),
                ids,
                truth,
                f.predict(&table).map_err(data_err)?,
            )
        }
        SavedModel::Deep {
            network,
            scale_factor,
            max_points,
            mask_padding,
            train_bins,
        } => {
            if ds.manifest.scale_factor.is_some_and(|s| s != *scale_factor) {
                log::warn!(
                    "dataset scale factor differs from the model's; records are used as stored"
                );
            }
            let s = geomclass_core::encoding::ScaleFactor::new(*scale_factor).map_err(data_err)?;
            let seqs = pipeline::sequences(&ds, &a.split, s, *max_points)?;
            let bs = TrainConfig::default().batch_size;
            let padding = if train_bins.is_empty() {
                EvalPadding::OwnBins
            } else {
                EvalPadding::TrainBins
            };
            let batches = pipeline::eval_batches(
                &seqs,
                bs,
                TrainConfig::default().n_bin(),
                padding,
                train_bins,
            )?;
            let ev = network
                .evaluate(&batches, *mask_padding)
                .map_err(data_err)?;
            let method = match network {
                DeepModel::Cnn(_) => "CNN",
                DeepModel::Rnn(_) => "RNN",
            };
            (method, ev.ids, ev.labels, ev.predictions)
        }
    };
    let acc = accuracy(&pred, &truth).map_err(data_err)?;
    let cm = confusion(&pred, &truth, k).map_err(data_err)?;
    let pfile = format!("predictions_{}.csv", a.split);
    report::write_predictions(
        &dir.join(&pfile),
        &ids,
        &truth,
        &pred,
        &ds.manifest.class_names,
    )?;
    let mut outputs = vec![pfile];
    outputs.extend(write_result(
        dir,
        &ds,
        a.data.task_name(),
        method,
        Score::Single(acc),
        &a.split,
        Some(&cm),
    )?);
    Ok(Outcome {
        effective: json!({"model": a.model, "split": a.split}),
        outputs,
        summary: format!("{method} on {}: accuracy {acc:.3}", a.split),
    })
}

fn report_cmd(a: &ReportArgs, dir: &Path) -> Result<Outcome, CliError> {
    let mut results = Vec::with_capacity(a.results.len());
    for p in &a.results {
        let path = if p.is_dir() {
            p.join(RESULT_FILE)
        } else {
            p.clone()
        };
        results.push(read_json::<ResultFile>(&path)?);
    }
    let mut tasks: Vec<String> = Vec::new();
    for r in &results {
        if !tasks.contains(&r.task) {
            tasks.push(r.task.clone());
        }
    }
    let mut table = geomclass_core::harness::ComparisonTable::new(tasks);
    for r in &results {
        table.set("Majority class", &r.task, Score::Single(r.majority));
        if !table.set(&r.method, &r.task, r.score) {
            return Err(data_err(format!("unknown method {:?}", r.method)));
        }
    }
    report::write_comparison(&dir.join("comparison.csv"), &table)?;
    let text = table.render();
    fs::write(dir.join("comparison.txt"), &text).map_err(crate::dataset::io_err(dir))?;
    Ok(Outcome {
        effective: json!({"results": a.results}),
        outputs: vec!["comparison.csv".into(), "comparison.txt".into()],
        summary: text.trim_end().to_string(),
    })
}
