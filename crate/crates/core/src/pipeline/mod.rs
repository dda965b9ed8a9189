//! Dataset plumbing and the end-to-end protocol: manifests, label maps,
//! overlap targets, greedy inference, the accuracy metric, synthetic
//! benchmarks, and `run_experiment` tying them together.

mod experiment;
mod infer;
mod labelmap;
mod manifest;
mod metric;
mod synth;
mod targets;

pub mod import;

pub use experiment::{
    candidate_feature, predict_split, run_experiment, training_examples, CategoryScore,
    ConfigEcho, ExperimentParams, FeatureConfig, ImageDescriptors, Prediction, RegionSpec,
    Report,
};
pub use infer::infer_labeling;
pub use labelmap::{voc_palette, LabelMap, VOID};
pub use manifest::{
    load_dataset, load_image_data, CandidateRecord, DatasetManifest, ImageData, ImageRecord,
    DEFAULT_CANDIDATE_CAP, MANIFEST_SCHEMA,
};
pub use metric::{aac, AacReport};
pub use synth::{
    synth_border_benchmark, synth_quadrant_benchmark, HALO_WIDTH, SYNTH_SIDE,
};
pub use targets::candidate_targets;
