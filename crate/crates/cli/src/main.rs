//! Command-line front end: every pipeline stage as a subcommand, plus the
//! synthetic benchmark generator and a VOC-layout importer.
//!
//! Exit codes: 0 on success, 2 on a usage error (bad flags or flag
//! combinations, reported before any work starts), 1 on a runtime error.
//! Diagnostics go to standard error; machine-readable output goes to files
//! or standard output only.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use segpool::descriptors::{dense_lbp, dense_sift, DenseGrid, DescriptorKind, Frame};
use segpool::model::LinearModel;
use segpool::partition::{compose_partition_sided, BorderSide, SpConfig};
use segpool::pipeline::{
    aac, candidate_feature, import::import_voc, load_dataset, predict_split, run_experiment,
    synth_border_benchmark, synth_quadrant_benchmark, training_examples, ExperimentParams,
    FeatureConfig, ImageDescriptors, LabelMap, RegionSpec,
};
use segpool::pooling::O2PConfig;
use segpool::raster::{BinaryMask, GrayImage};

#[derive(Parser)]
#[command(
    name = "segpool",
    about = "Spatially-codified second-order pooling over object candidates",
    version
)]
struct Cli {
    /// Worker threads for parallel stages (default: all logical cores).
    /// Results are identical for any thread count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition an image grid around a candidate mask into Figure, Border,
    /// and Ground (optionally with a spatial pyramid over the Figure) and
    /// write it as an indexed PNG.
    Partition {
        /// Candidate mask PNG (nonzero = member).
        #[arg(long)]
        mask: PathBuf,
        /// Output PNG path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        geometry: GeometryArgs,
    },
    /// Extract dense local descriptors from an image and write them as JSON.
    Describe {
        /// Input image (PNG or JPEG).
        #[arg(long)]
        image: PathBuf,
        /// Candidate mask PNG; required by eMSIFT.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Output JSON path (standard output if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated descriptor kinds: eSIFT, eMSIFT, eLBP.
        #[arg(long, default_value = "eSIFT")]
        descriptors: String,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Assemble the pooled feature vector of one candidate mask.
    Pool {
        /// Input image (PNG or JPEG).
        #[arg(long)]
        image: PathBuf,
        /// Candidate mask PNG.
        #[arg(long)]
        mask: PathBuf,
        /// Output JSON path (standard output if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        feature: FeatureArgs,
    },
    /// Train per-category ridge scorers on a dataset split.
    Train {
        /// Dataset manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Output model path; a .json metadata sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Training split name.
        #[arg(long, default_value = "train")]
        split: String,
        /// Ridge regularization strength.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[command(flatten)]
        feature: FeatureArgs,
    },
    /// Score candidates with a trained model and write one labeling PNG per
    /// image of a split. Feature flags must match the model's configuration.
    Predict {
        /// Dataset manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Output directory for labeling PNGs (created if missing).
        #[arg(long)]
        out_dir: PathBuf,
        /// Split to predict.
        #[arg(long, default_value = "val")]
        split: String,
        /// Score threshold for accepting a (candidate, category) pair.
        #[arg(long, default_value_t = 0.3)]
        tau: f64,
        #[command(flatten)]
        feature: FeatureArgs,
    },
    /// Compare predicted labelings against ground truth with the
    /// per-category intersection-over-union metric.
    Evaluate {
        /// Dataset manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of labeling PNGs named <image id>.png.
        #[arg(long)]
        predictions: PathBuf,
        /// Split to evaluate.
        #[arg(long, default_value = "val")]
        split: String,
        /// Include the background category in the mean.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set, value_name = "BOOL")]
        include_background: bool,
        /// Report JSON path; with it the aligned table goes to standard
        /// output, without it the JSON does.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic two-class benchmark dataset.
    Synth {
        /// Output dataset directory (created if missing).
        #[arg(long)]
        out_dir: PathBuf,
        /// Texture placement: class signal in the border halo, or in the
        /// spatial arrangement of the interior.
        #[arg(long, default_value = "border", value_parser = ["border", "quadrant"])]
        variant: String,
        /// Generator seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Training images.
        #[arg(long, default_value_t = 16)]
        n_train: usize,
        /// Validation images.
        #[arg(long, default_value_t = 8)]
        n_test: usize,
    },
    /// Train on one split, then infer and evaluate on another: the full
    /// protocol in one command.
    Run {
        /// Dataset manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Report JSON path; with it the aligned table goes to standard
        /// output, without it the JSON does.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ridge regularization strength.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Score threshold for accepting a (candidate, category) pair.
        #[arg(long, default_value_t = 0.3)]
        tau: f64,
        /// Training split name.
        #[arg(long, default_value = "train")]
        train_split: String,
        /// Evaluation split name.
        #[arg(long, default_value = "val")]
        eval_split: String,
        /// Include the background category in the mean.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set, value_name = "BOOL")]
        include_background: bool,
        #[command(flatten)]
        feature: FeatureArgs,
    },
    /// Convert an indexed labeling PNG to a plain RGB PNG using the fixed
    /// palette (category index bit-reversed into RGB; void = 224,224,192).
    Visualize {
        /// Labeling PNG (indexed or grayscale).
        #[arg(long)]
        labels: PathBuf,
        /// Output RGB PNG path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a VOC-layout directory (JPEGImages/, SegmentationClass/,
    /// ImageSets/Segmentation/*.txt) into a dataset with a manifest,
    /// synthesizing one candidate per annotated category.
    Import {
        /// VOC-layout root directory.
        #[arg(long)]
        voc_root: PathBuf,
        /// Output dataset directory (created if missing).
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Partition geometry shared by `partition` and, through [`FeatureArgs`],
/// by every feature-building subcommand.
#[derive(Args)]
struct GeometryArgs {
    /// Border crown width in pixels.
    #[arg(long, default_value_t = 5.0)]
    border_width: f64,
    /// Side of the contour the border occupies: exterior, interior, or
    /// straddle.
    #[arg(long, default_value = "exterior")]
    border_side: String,
    /// Spatial pyramid over the Figure: none, crown, or cartesian.
    #[arg(long, default_value = "none", value_parser = ["none", "crown", "cartesian"])]
    sp: String,
    /// Crown layer count; only valid with --sp crown.
    #[arg(long)]
    layers: Option<usize>,
}

impl GeometryArgs {
    fn border_side(&self) -> Result<BorderSide, AppError> {
        self.border_side.parse::<BorderSide>().map_err(usage)
    }

    fn sp(&self) -> Result<SpConfig, AppError> {
        match self.sp.as_str() {
            "crown" => Ok(SpConfig::Crown(self.layers.unwrap_or(4))),
            other => {
                if self.layers.is_some() {
                    return Err(AppError::Usage(format!(
                        "--layers requires --sp crown (got --sp {other})"
                    )));
                }
                Ok(if other == "cartesian" {
                    SpConfig::Cartesian
                } else {
                    SpConfig::None
                })
            }
        }
    }
}

/// Dense sampling layout.
#[derive(Args)]
struct GridArgs {
    /// Grid stride in pixels.
    #[arg(long, default_value_t = 4)]
    stride: usize,
    /// Comma-separated patch sizes (even, >= 8).
    #[arg(long, default_value = "16,24,32")]
    scales: String,
}

impl GridArgs {
    fn grid(&self) -> Result<DenseGrid, AppError> {
        let scales = self
            .scales
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| AppError::Usage(format!("--scales: `{t}` is not an integer")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        DenseGrid::new(self.stride, scales).map_err(usage)
    }
}

/// The full feature configuration, shared by pool/train/predict/run.
#[derive(Args)]
struct FeatureArgs {
    /// Comma-separated pooling regions: F (figure), SPF (figure pyramid
    /// cells), B (border), G (ground).
    #[arg(long, default_value = "F,B")]
    regions: String,
    /// Comma-separated descriptor kinds: eSIFT, eMSIFT, eLBP.
    #[arg(long, default_value = "eSIFT")]
    descriptors: String,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Positive-definiteness floor added before the matrix logarithm.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Power-normalization exponent applied to the flattened feature.
    #[arg(long, default_value_t = 0.5)]
    power: f64,
}

impl FeatureArgs {
    fn config(&self) -> Result<FeatureConfig, AppError> {
        let regions = parse_list::<RegionSpec>(&self.regions, "--regions")?;
        let descriptors = parse_list::<DescriptorKind>(&self.descriptors, "--descriptors")?;
        let cfg = FeatureConfig {
            regions,
            descriptors,
            border_width: self.geometry.border_width,
            border_side: self.geometry.border_side()?,
            sp: self.geometry.sp()?,
            grid: self.grid.grid()?,
            o2p: O2PConfig { epsilon: self.epsilon, power: self.power, ..O2PConfig::default() },
        };
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

fn parse_list<T>(s: &str, flag: &str) -> Result<Vec<T>, AppError>
where
    T: std::str::FromStr<Err = segpool::Error>,
{
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>())
        .collect::<segpool::Result<_>>()
        .map_err(usage)?;
    if items.is_empty() {
        return Err(AppError::Usage(format!("{flag} must not be empty")));
    }
    Ok(items)
}

enum AppError {
    /// Bad flags or flag combinations; exit 2 before any work.
    Usage(String),
    /// Failure while doing the work; exit 1.
    Runtime(segpool::Error),
}

impl From<segpool::Error> for AppError {
    fn from(e: segpool::Error) -> Self {
        AppError::Runtime(e)
    }
}

fn usage(e: segpool::Error) -> AppError {
    AppError::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(AppError::Usage("--jobs must be >= 1".into()));
        }
        rayon_pool(jobs)?;
    }
    match cli.command {
        Command::Partition { mask, out, geometry } => cmd_partition(&mask, &out, &geometry),
        Command::Describe { image, mask, out, descriptors, grid } => {
            cmd_describe(&image, mask.as_deref(), out.as_deref(), &descriptors, &grid)
        }
        Command::Pool { image, mask, out, feature } => {
            cmd_pool(&image, &mask, out.as_deref(), &feature)
        }
        Command::Train { manifest, out, split, lambda, feature } => {
            cmd_train(&manifest, &out, &split, lambda, &feature)
        }
        Command::Predict { manifest, model, out_dir, split, tau, feature } => {
            cmd_predict(&manifest, &model, &out_dir, &split, tau, &feature)
        }
        Command::Evaluate { manifest, predictions, split, include_background, out } => {
            cmd_evaluate(&manifest, &predictions, &split, include_background, out.as_deref())
        }
        Command::Synth { out_dir, variant, seed, n_train, n_test } => {
            cmd_synth(&out_dir, &variant, seed, n_train, n_test)
        }
        Command::Run {
            manifest,
            out,
            lambda,
            tau,
            train_split,
            eval_split,
            include_background,
            feature,
        } => {
            let params = ExperimentParams {
                feature: feature.config()?,
                lambda,
                tau,
                train_split,
                eval_split,
                include_background,
            };
            cmd_run(&manifest, out.as_deref(), &params)
        }
        Command::Visualize { labels, out } => {
            let map = LabelMap::load_png(&labels)?;
            map.save_color_png(&out)?;
            Ok(())
        }
        Command::Import { voc_root, out_dir } => {
            let manifest = import_voc(&voc_root, &out_dir)?;
            println!("{}", manifest.display());
            Ok(())
        }
    }
}

fn rayon_pool(jobs: usize) -> Result<(), AppError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| {
            AppError::Runtime(segpool::Error::InvalidParameter(format!(
                "worker pool setup failed: {e}"
            )))
        })
}

fn cmd_partition(
    mask: &std::path::Path,
    out: &std::path::Path,
    geometry: &GeometryArgs,
) -> Result<(), AppError> {
    let side = geometry.border_side()?;
    let sp = geometry.sp()?;
    let mask = BinaryMask::load_png(mask)?;
    let part = compose_partition_sided(&mask, geometry.border_width, side, sp)?;
    for (region, count) in part.region_counts() {
        eprintln!("{region:?}: {count} pixels");
    }
    part.save_png(out)?;
    Ok(())
}

#[derive(Serialize)]
struct DescriptorDump {
    stride: usize,
    scales: Vec<usize>,
    descriptors: std::collections::BTreeMap<String, Vec<DescriptorEntry>>,
}

#[derive(Serialize)]
struct DescriptorEntry {
    x: usize,
    y: usize,
    scale: usize,
    vector: Vec<f64>,
}

fn cmd_describe(
    image: &std::path::Path,
    mask: Option<&std::path::Path>,
    out: Option<&std::path::Path>,
    descriptors: &str,
    grid_args: &GridArgs,
) -> Result<(), AppError> {
    let kinds = parse_list::<DescriptorKind>(descriptors, "--descriptors")?;
    if kinds.contains(&DescriptorKind::EMSift) && mask.is_none() {
        return Err(AppError::Usage("--descriptors eMSIFT requires --mask".into()));
    }
    let grid = grid_args.grid()?;
    let img = GrayImage::load_png(image)?;
    let mask = mask.map(BinaryMask::load_png).transpose()?;
    let frame = Frame::image(img.width(), img.height());

    let mut dump = DescriptorDump {
        stride: grid.stride(),
        scales: grid.scales().to_vec(),
        descriptors: Default::default(),
    };
    for kind in kinds {
        let descs = match kind {
            DescriptorKind::ESift => dense_sift(&img, &grid, None, frame),
            DescriptorKind::EMSift => {
                let m = mask.as_ref().expect("checked above");
                dense_sift(&img, &grid, Some(m), Frame::mask_bbox(m)?)
            }
            DescriptorKind::ELbp => dense_lbp(&img, &grid, frame),
        };
        let entries = descs
            .into_iter()
            .map(|d| DescriptorEntry { x: d.x, y: d.y, scale: d.scale, vector: d.vector })
            .collect();
        dump.descriptors.insert(kind.to_string(), entries);
    }
    emit_json(out, &dump)
}

#[derive(Serialize)]
struct PooledDump {
    digest: String,
    dim: usize,
    feature: Vec<f64>,
}

fn cmd_pool(
    image: &std::path::Path,
    mask: &std::path::Path,
    out: Option<&std::path::Path>,
    feature: &FeatureArgs,
) -> Result<(), AppError> {
    let cfg = feature.config()?;
    let img = GrayImage::load_png(image)?;
    let mask = BinaryMask::load_png(mask)?;
    let cache = ImageDescriptors::build(&img, &cfg);
    let vec = candidate_feature(&img, &mask, &cfg, &cache)?;
    emit_json(
        out,
        &PooledDump { digest: cfg.digest(), dim: vec.len(), feature: vec },
    )
}

fn cmd_train(
    manifest: &std::path::Path,
    out: &std::path::Path,
    split: &str,
    lambda: f64,
    feature: &FeatureArgs,
) -> Result<(), AppError> {
    let cfg = feature.config()?;
    let dataset = load_dataset(manifest)?;
    let examples = training_examples(&dataset, &cfg, split)?;
    eprintln!(
        "training on {} candidates from split `{split}` ({} dims)",
        examples.len(),
        cfg.feature_dim()
    );
    let model = segpool::model::train_ridge(&examples, lambda, dataset.categories(), cfg.digest())?;
    model.save(out)?;
    Ok(())
}

fn cmd_predict(
    manifest: &std::path::Path,
    model_path: &std::path::Path,
    out_dir: &std::path::Path,
    split: &str,
    tau: f64,
    feature: &FeatureArgs,
) -> Result<(), AppError> {
    let cfg = feature.config()?;
    let dataset = load_dataset(manifest)?;
    let model = LinearModel::load(model_path)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| segpool::Error::Io { path: out_dir.to_path_buf(), source: e })?;
    let predictions = predict_split(&dataset, &model, &cfg, tau, split)?;
    for p in &predictions {
        p.labeling.save_png(out_dir.join(format!("{}.png", p.id)))?;
    }
    eprintln!("wrote {} labelings to {}", predictions.len(), out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    split: String,
    include_background: bool,
    n_images: usize,
    categories: Vec<EvalRow>,
    mean: f64,
}

#[derive(Serialize)]
struct EvalRow {
    name: String,
    accuracy: Option<f64>,
}

fn cmd_evaluate(
    manifest: &std::path::Path,
    predictions: &std::path::Path,
    split: &str,
    include_background: bool,
    out: Option<&std::path::Path>,
) -> Result<(), AppError> {
    let dataset = load_dataset(manifest)?;
    let ids = dataset.split(split);
    if ids.is_empty() {
        return Err(AppError::Runtime(segpool::Error::EmptySplit(split.to_string())));
    }
    let mut loaded = Vec::with_capacity(ids.len());
    for id in ids {
        let pred_path = predictions.join(format!("{id}.png"));
        if !pred_path.is_file() {
            return Err(AppError::Runtime(segpool::Error::MissingFile(pred_path)));
        }
        let pred = LabelMap::load_png(&pred_path)?;
        let record = dataset.image(id)?;
        let gt = LabelMap::load_png(&record.ground_truth)?;
        loaded.push((id.clone(), pred, gt));
    }
    let pairs: Vec<(&str, &LabelMap, &LabelMap)> =
        loaded.iter().map(|(id, p, g)| (id.as_str(), p, g)).collect();
    let metric = aac(&pairs, dataset.n_categories(), include_background)?;

    let report = EvalReport {
        split: split.to_string(),
        include_background,
        n_images: pairs.len(),
        categories: dataset
            .categories()
            .iter()
            .zip(&metric.per_category)
            .map(|(name, acc)| EvalRow { name: name.clone(), accuracy: *acc })
            .collect(),
        mean: metric.mean,
    };
    emit_json(out, &report)
}

fn cmd_synth(
    out_dir: &std::path::Path,
    variant: &str,
    seed: u64,
    n_train: usize,
    n_test: usize,
) -> Result<(), AppError> {
    match variant {
        "quadrant" => synth_quadrant_benchmark(out_dir, seed, n_train, n_test)?,
        _ => synth_border_benchmark(out_dir, seed, n_train, n_test)?,
    };
    println!("{}", out_dir.join("manifest.json").display());
    Ok(())
}

fn cmd_run(
    manifest: &std::path::Path,
    out: Option<&std::path::Path>,
    params: &ExperimentParams,
) -> Result<(), AppError> {
    let dataset = load_dataset(manifest)?;
    let report = run_experiment(&dataset, params)?;
    let json = report.to_json()?;
    match out {
        Some(path) => {
            std::fs::write(path, json)
                .map_err(|e| segpool::Error::Io { path: path.to_path_buf(), source: e })?;
            print!("{}", report.table());
        }
        None => print!("{json}"),
    }
    Ok(())
}

/// Writes pretty JSON to `out`, or to standard output when `out` is absent.
fn emit_json<T: Serialize>(out: Option<&std::path::Path>, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).map_err(segpool::Error::from)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| segpool::Error::Io { path: path.to_path_buf(), source: e }.into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
