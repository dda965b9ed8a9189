//! End-to-end experiments: per-candidate feature assembly, training,
//! inference over an evaluation split, and the report.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptors::{
    assign_to_pools, dense_lbp, dense_sift, DenseGrid, DescriptorKind, Frame, LocalDescriptor,
};
use crate::error::{Error, Result};
use crate::model::{score, train_ridge, LinearModel, TrainExample};
use crate::partition::{compose_partition_sided, BorderSide, RegionId, SpConfig};
use crate::pooling::{concat_features, o2p_pool, O2PConfig};
use crate::raster::{BinaryMask, GrayImage};

use super::labelmap::LabelMap;
use super::manifest::{load_image_data, DatasetManifest};
use super::metric::aac;
use super::targets::candidate_targets;
use super::infer::infer_labeling;

/// Which pooled blocks enter the concatenated feature.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum RegionSpec {
    /// The undivided figure (`F`).
    Figure,
    /// One block per spatial-pyramid cell of the figure (`SPF`).
    FigureCells,
    /// The border crown (`B`).
    Border,
    /// Everything else (`G`).
    Ground,
}

impl std::fmt::Display for RegionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegionSpec::Figure => write!(f, "F"),
            RegionSpec::FigureCells => write!(f, "SPF"),
            RegionSpec::Border => write!(f, "B"),
            RegionSpec::Ground => write!(f, "G"),
        }
    }
}

impl std::str::FromStr for RegionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F" => Ok(RegionSpec::Figure),
            "SPF" => Ok(RegionSpec::FigureCells),
            "B" => Ok(RegionSpec::Border),
            "G" => Ok(RegionSpec::Ground),
            other => Err(Error::InvalidParameter(format!(
                "unknown region `{other}` (expected F, SPF, B, or G)"
            ))),
        }
    }
}

/// Everything that determines the feature layout of one candidate: which
/// region blocks are pooled, with which descriptors, over which grid, and
/// how the pooled matrices are normalized. Two configurations with equal
/// digests produce interchangeable features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub regions: Vec<RegionSpec>,
    pub descriptors: Vec<DescriptorKind>,
    pub border_width: f64,
    pub border_side: BorderSide,
    pub sp: SpConfig,
    pub grid: DenseGrid,
    pub o2p: O2PConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            regions: vec![RegionSpec::Figure, RegionSpec::Border],
            descriptors: vec![DescriptorKind::ESift],
            border_width: 5.0,
            border_side: BorderSide::Exterior,
            sp: SpConfig::None,
            grid: DenseGrid::default(),
            o2p: O2PConfig::default(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::InvalidParameter("no pooling regions selected".into()));
        }
        let mut regions = self.regions.clone();
        regions.sort();
        regions.dedup();
        if regions.len() != self.regions.len() {
            return Err(Error::InvalidParameter("duplicate pooling region".into()));
        }
        if self.descriptors.is_empty() {
            return Err(Error::InvalidParameter("no descriptors selected".into()));
        }
        let mut kinds = self.descriptors.clone();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.descriptors.len() {
            return Err(Error::InvalidParameter("duplicate descriptor kind".into()));
        }
        if !(self.border_width.is_finite() && self.border_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "border width must be positive, got {}",
                self.border_width
            )));
        }
        if self.regions.contains(&RegionSpec::FigureCells) && self.sp == SpConfig::None {
            return Err(Error::InvalidParameter(
                "region SPF needs a spatial-pyramid scheme (crown or cartesian)".into(),
            ));
        }
        if let SpConfig::Crown(n) = self.sp {
            if !(1..=32).contains(&n) {
                return Err(Error::InvalidParameter(format!(
                    "crown layer count must be in 1..=32, got {n}"
                )));
            }
        }
        self.o2p.validate()
    }

    /// Region specs in canonical order (F, SPF, B, G).
    fn sorted_regions(&self) -> Vec<RegionSpec> {
        let mut regions = self.regions.clone();
        regions.sort();
        regions
    }

    /// Descriptor kinds in canonical order (eSIFT, eMSIFT, eLBP).
    fn sorted_descriptors(&self) -> Vec<DescriptorKind> {
        let mut kinds = self.descriptors.clone();
        kinds.sort();
        kinds
    }

    /// The region ids pooled for each descriptor kind, in the layout order
    /// of the concatenated feature.
    pub fn block_region_ids(&self) -> Vec<RegionId> {
        let mut ids = Vec::new();
        for spec in self.sorted_regions() {
            match spec {
                RegionSpec::Figure => ids.push(RegionId::Figure(None)),
                RegionSpec::FigureCells => {
                    ids.extend((0..self.sp.cell_count()).map(|k| RegionId::Figure(Some(k))))
                }
                RegionSpec::Border => ids.push(RegionId::Border),
                RegionSpec::Ground => ids.push(RegionId::Ground),
            }
        }
        ids
    }

    /// Length of the concatenated feature vector.
    pub fn feature_dim(&self) -> usize {
        let blocks = self.block_region_ids().len();
        self.descriptors
            .iter()
            .map(|k| {
                let d = k.dim();
                blocks * d * (d + 1) / 2
            })
            .sum()
    }

    /// Stable textual fingerprint of the layout-relevant parameters. Region
    /// and descriptor order is canonicalized first, so logically equal
    /// configurations share a digest.
    pub fn digest(&self) -> String {
        let join = |items: Vec<String>| items.join(",");
        let scales: Vec<String> = self.grid.scales().iter().map(|s| s.to_string()).collect();
        format!(
            "fcfg1|regions={}|desc={}|bw={}|side={}|sp={}|stride={}|scales={}|eps={}|pow={}|offdiag={}",
            join(self.sorted_regions().iter().map(|r| r.to_string()).collect()),
            join(self.sorted_descriptors().iter().map(|k| k.to_string()).collect()),
            self.border_width,
            self.border_side,
            self.sp,
            self.grid.stride(),
            join(scales),
            self.o2p.epsilon,
            self.o2p.power,
            self.o2p.offdiag_scale,
        )
    }
}

/// Mask-independent dense descriptors of one image, computed once and
/// shared across that image's candidates. Only the masked descriptor
/// (eMSIFT) has to be re-extracted per candidate.
pub struct ImageDescriptors {
    esift: Option<Vec<LocalDescriptor>>,
    elbp: Option<Vec<LocalDescriptor>>,
}

impl ImageDescriptors {
    pub fn build(image: &GrayImage, cfg: &FeatureConfig) -> Self {
        let frame = Frame::image(image.width(), image.height());
        ImageDescriptors {
            esift: cfg
                .descriptors
                .contains(&DescriptorKind::ESift)
                .then(|| dense_sift(image, &cfg.grid, None, frame)),
            elbp: cfg
                .descriptors
                .contains(&DescriptorKind::ELbp)
                .then(|| dense_lbp(image, &cfg.grid, frame)),
        }
    }
}

/// Assembles the concatenated pooled feature of one candidate mask.
///
/// Blocks with no descriptors (a cell the mask never reaches, a border
/// clipped away) pool to the all-zero vector, so the feature length depends
/// only on the configuration.
pub fn candidate_feature(
    image: &GrayImage,
    mask: &BinaryMask,
    cfg: &FeatureConfig,
    cache: &ImageDescriptors,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    // The pyramid cells only need to exist in the partition when a cell
    // block was requested; the undivided figure pools identically either
    // way because the cells tile it.
    let sp = if cfg.regions.contains(&RegionSpec::FigureCells) {
        cfg.sp
    } else {
        SpConfig::None
    };
    let partition = compose_partition_sided(mask, cfg.border_width, cfg.border_side, sp)?;
    let blocks = cfg.block_region_ids();

    let mut parts = Vec::with_capacity(blocks.len() * cfg.descriptors.len());
    for &kind in &cfg.descriptors {
        let masked;
        let descs: &[LocalDescriptor] = match kind {
            DescriptorKind::ESift => self_or_missing(&cache.esift, kind)?,
            DescriptorKind::ELbp => self_or_missing(&cache.elbp, kind)?,
            DescriptorKind::EMSift => {
                masked = dense_sift(image, &cfg.grid, Some(mask), Frame::mask_bbox(mask)?);
                &masked
            }
        };
        let pools = assign_to_pools(descs, &partition);
        let empty = Vec::new();
        for &block in &blocks {
            let pooled = if block == RegionId::Figure(None) && sp != SpConfig::None {
                // Whole-figure block while the partition is split into
                // cells: pool the union of the cells.
                let merged: Vec<LocalDescriptor> = pools
                    .iter()
                    .filter(|(id, _)| matches!(id, RegionId::Figure(_)))
                    .flat_map(|(_, v)| v.iter().cloned())
                    .collect();
                o2p_pool(block, kind, &merged, &cfg.o2p)?
            } else {
                let pool = pools.get(&block).unwrap_or(&empty);
                o2p_pool(block, kind, pool, &cfg.o2p)?
            };
            parts.push(pooled);
        }
    }
    concat_features(&parts)
}

fn self_or_missing(
    cached: &Option<Vec<LocalDescriptor>>,
    kind: DescriptorKind,
) -> Result<&[LocalDescriptor]> {
    cached.as_deref().ok_or_else(|| {
        Error::InvalidParameter(format!(
            "image descriptor cache was built without {kind}"
        ))
    })
}

/// Everything `run_experiment` needs beyond the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub feature: FeatureConfig,
    pub lambda: f64,
    pub tau: f64,
    pub train_split: String,
    pub eval_split: String,
    pub include_background: bool,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            feature: FeatureConfig::default(),
            lambda: 1.0,
            tau: 0.3,
            train_split: "train".into(),
            eval_split: "val".into(),
            include_background: true,
        }
    }
}

/// Fully-resolved configuration echoed into every report, so side-by-side
/// comparisons are self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub digest: String,
    pub regions: Vec<String>,
    pub descriptors: Vec<String>,
    pub border_width: f64,
    pub border_side: String,
    pub sp: String,
    pub stride: usize,
    pub scales: Vec<usize>,
    pub epsilon: f64,
    pub power: f64,
    pub offdiag_scale: f64,
    pub lambda: f64,
    pub tau: f64,
    pub include_background: bool,
    pub train_split: String,
    pub eval_split: String,
    pub n_train_images: usize,
    pub n_train_candidates: usize,
    pub n_eval_images: usize,
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub name: String,
    /// Percentage, or `None` when the category appears nowhere.
    pub accuracy: Option<f64>,
}

/// Per-category accuracies, their mean, and the configuration echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ConfigEcho,
    pub categories: Vec<CategoryScore>,
    pub mean: f64,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Aligned plain-text table: category, accuracy, mean.
    pub fn table(&self) -> String {
        let name_w = self
            .categories
            .iter()
            .map(|c| c.name.len())
            .chain(["category".len(), "mean".len()])
            .max()
            .unwrap();
        let mut out = String::new();
        let rule = format!("{}  {}", "-".repeat(name_w), "-".repeat(8));
        let _ = writeln!(out, "{:<name_w$}  {:>8}", "category", "accuracy");
        let _ = writeln!(out, "{rule}");
        for c in &self.categories {
            let acc = match c.accuracy {
                Some(a) => format!("{a:.2}"),
                None => "-".to_string(),
            };
            let _ = writeln!(out, "{:<name_w$}  {acc:>8}", c.name);
        }
        let _ = writeln!(out, "{rule}");
        let _ = writeln!(out, "{:<name_w$}  {:>8}", "mean", format!("{:.2}", self.mean));
        out
    }
}

/// Extracts features and overlap targets for every candidate of a split,
/// in split order, image-parallel.
pub fn training_examples(
    manifest: &DatasetManifest,
    cfg: &FeatureConfig,
    split: &str,
) -> Result<Vec<TrainExample>> {
    cfg.validate()?;
    let ids = manifest.split(split);
    if ids.is_empty() {
        return Err(Error::EmptySplit(split.to_string()));
    }
    let n = manifest.n_categories();
    let per_image: Vec<Vec<TrainExample>> = ids
        .par_iter()
        .map(|id| -> Result<Vec<TrainExample>> {
            let data = load_image_data(manifest, id)?;
            let cache = ImageDescriptors::build(&data.image, cfg);
            data.candidates
                .iter()
                .map(|cand| {
                    let feature = candidate_feature(&data.image, &cand.mask, cfg, &cache)
                        .map_err(|e| {
                            e.with_context(format!("image `{id}`, candidate `{}`", cand.id))
                        })?;
                    let targets = candidate_targets(&cand.mask, &data.ground_truth, n);
                    Ok(TrainExample { feature, targets })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_image.into_iter().flatten().collect())
}

/// One evaluated image: the inferred labeling next to its ground truth.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub id: String,
    pub labeling: LabelMap,
    pub ground_truth: LabelMap,
}

/// Scores every candidate of a split with the model and pastes them into
/// per-image labelings, image-parallel, in split order.
pub fn predict_split(
    manifest: &DatasetManifest,
    model: &LinearModel,
    cfg: &FeatureConfig,
    tau: f64,
    split: &str,
) -> Result<Vec<Prediction>> {
    cfg.validate()?;
    let ids = manifest.split(split);
    if ids.is_empty() {
        return Err(Error::EmptySplit(split.to_string()));
    }
    let digest = cfg.digest();
    let n = manifest.n_categories();
    ids.par_iter()
        .map(|id| -> Result<Prediction> {
            let mut data = load_image_data(manifest, id)?;
            let cache = ImageDescriptors::build(&data.image, cfg);
            for cand in &mut data.candidates {
                let feature = candidate_feature(&data.image, &cand.mask, cfg, &cache)
                    .map_err(|e| {
                        e.with_context(format!("image `{id}`, candidate `{}`", cand.id))
                    })?;
                cand.scores = Some(score(model, &feature, &digest)?);
            }
            let labeling = infer_labeling(
                &data.candidates,
                n,
                tau,
                data.image.width(),
                data.image.height(),
            )
            .map_err(|e| e.with_context(format!("image `{id}`")))?;
            Ok(Prediction { id: id.clone(), labeling, ground_truth: data.ground_truth })
        })
        .collect()
}

/// The full protocol: train on the train split, infer and evaluate on the
/// eval split, and echo the resolved configuration into the report.
/// Deterministic for a fixed manifest and parameters, independent of the
/// worker-thread count.
pub fn run_experiment(manifest: &DatasetManifest, params: &ExperimentParams) -> Result<Report> {
    params.feature.validate()?;
    if !params.tau.is_finite() {
        return Err(Error::InvalidParameter("tau must be finite".into()));
    }

    let examples = training_examples(manifest, &params.feature, &params.train_split)?;
    let n_train_candidates = examples.len();
    let digest = params.feature.digest();
    let model = train_ridge(&examples, params.lambda, manifest.categories(), digest.clone())?;
    drop(examples);

    let predictions = predict_split(
        manifest,
        &model,
        &params.feature,
        params.tau,
        &params.eval_split,
    )?;
    let pairs: Vec<(&str, &LabelMap, &LabelMap)> = predictions
        .iter()
        .map(|p| (p.id.as_str(), &p.labeling, &p.ground_truth))
        .collect();
    let metric = aac(&pairs, manifest.n_categories(), params.include_background)?;

    let cfg = &params.feature;
    let config = ConfigEcho {
        digest,
        regions: cfg.sorted_regions().iter().map(|r| r.to_string()).collect(),
        descriptors: cfg.sorted_descriptors().iter().map(|k| k.to_string()).collect(),
        border_width: cfg.border_width,
        border_side: cfg.border_side.to_string(),
        sp: cfg.sp.to_string(),
        stride: cfg.grid.stride(),
        scales: cfg.grid.scales().to_vec(),
        epsilon: cfg.o2p.epsilon,
        power: cfg.o2p.power,
        offdiag_scale: cfg.o2p.offdiag_scale,
        lambda: params.lambda,
        tau: params.tau,
        include_background: params.include_background,
        train_split: params.train_split.clone(),
        eval_split: params.eval_split.clone(),
        n_train_images: manifest.split(&params.train_split).len(),
        n_train_candidates,
        n_eval_images: predictions.len(),
        feature_dim: cfg.feature_dim(),
    };
    let categories = manifest
        .categories()
        .iter()
        .zip(&metric.per_category)
        .map(|(name, acc)| CategoryScore { name: clone_name(name), accuracy: *acc })
        .collect();
    Ok(Report { config, categories, mean: metric.mean })
}

fn clone_name(name: &str) -> String {
    name.to_string()
}
