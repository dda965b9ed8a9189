//! Importer for VOC-layout segmentation datasets: `JPEGImages/`,
//! `SegmentationClass/`, and `ImageSets/Segmentation/*.txt` split lists.
//!
//! Candidate masks are synthesized from the annotation, one per foreground
//! category present in the image, ranked by support size. That keeps
//! imported datasets self-contained without an external proposal stage;
//! externally generated candidates can be dropped into the candidate
//! directories afterwards.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

use super::labelmap::{LabelMap, VOID};
use super::manifest::{write_manifest_file, ImageEntry, ManifestFile};

/// The 21-entry category table of the VOC segmentation task.
pub const VOC_CATEGORIES: [&str; 21] = [
    "background",
    "aeroplane",
    "bicycle",
    "bird",
    "boat",
    "bottle",
    "bus",
    "car",
    "cat",
    "chair",
    "cow",
    "diningtable",
    "dog",
    "horse",
    "motorbike",
    "person",
    "pottedplant",
    "sheep",
    "sofa",
    "train",
    "tvmonitor",
];

/// Converts a VOC-layout tree into a self-contained dataset directory with
/// a manifest, returning the manifest path.
pub fn import_voc(voc_root: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let voc_root = voc_root.as_ref();
    let out_dir = out_dir.as_ref();

    let split_dir = voc_root.join("ImageSets/Segmentation");
    if !split_dir.is_dir() {
        return Err(Error::MissingFile(split_dir));
    }
    let mut splits: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut split_files: Vec<PathBuf> = fs::read_dir(&split_dir)
        .map_err(|e| Error::io(&split_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    split_files.sort();
    for file in &split_files {
        let name = file
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Manifest(format!("unusable split file name {file:?}")))?
            .to_string();
        let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        let ids: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        splits.insert(name, ids);
    }
    if splits.is_empty() {
        return Err(Error::Manifest(format!(
            "no split lists found under {split_dir:?}"
        )));
    }

    let mut ids: Vec<String> = splits.values().flatten().cloned().collect();
    ids.sort();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::Manifest("all split lists are empty".into()));
    }

    for sub in ["images", "gt", "candidates"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let mut images = Vec::with_capacity(ids.len());
    for id in &ids {
        images.push(import_one(voc_root, out_dir, id)
            .map_err(|e| e.with_context(format!("image `{id}`")))?);
    }

    let manifest_path = out_dir.join("manifest.json");
    write_manifest_file(
        &manifest_path,
        &ManifestFile {
            schema: 1,
            root: None,
            categories: VOC_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            candidate_cap: None,
            splits,
            images,
        },
    )?;
    Ok(manifest_path)
}

fn import_one(voc_root: &Path, out_dir: &Path, id: &str) -> Result<ImageEntry> {
    let src_image = ["png", "jpg", "jpeg"]
        .iter()
        .map(|ext| voc_root.join(format!("JPEGImages/{id}.{ext}")))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::MissingFile(voc_root.join(format!("JPEGImages/{id}.*"))))?;
    let src_gt = voc_root.join(format!("SegmentationClass/{id}.png"));
    if !src_gt.is_file() {
        return Err(Error::MissingFile(src_gt));
    }

    let ext = src_image.extension().unwrap().to_string_lossy();
    let image_rel = PathBuf::from(format!("images/{id}.{ext}"));
    let gt_rel = PathBuf::from(format!("gt/{id}.png"));
    fs::copy(&src_image, out_dir.join(&image_rel)).map_err(|e| Error::io(&src_image, e))?;
    fs::copy(&src_gt, out_dir.join(&gt_rel)).map_err(|e| Error::io(&src_gt, e))?;

    let gt = LabelMap::load_png(&src_gt)?;
    let cand_rel = PathBuf::from(format!("candidates/{id}"));
    let cand_dir = out_dir.join(&cand_rel);
    fs::create_dir_all(&cand_dir).map_err(|e| Error::io(&cand_dir, e))?;

    // One candidate per foreground class present: its full support.
    let mut supports: BTreeMap<u8, usize> = BTreeMap::new();
    for &l in gt.labels() {
        if l != 0 && l != VOID && (l as usize) < VOC_CATEGORIES.len() {
            *supports.entry(l).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(u8, usize)> = supports.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut ranking = String::new();
    for (label, _) in &ranked {
        let label = *label;
        let mask = BinaryMask::from_fn(gt.width(), gt.height(), |x, y| {
            gt.get(x, y) == label
        })?;
        let cand_id = format!("class_{label:03}");
        mask.save_png(cand_dir.join(format!("{cand_id}.png")))?;
        ranking.push_str(&cand_id);
        ranking.push('\n');
    }
    let ranking_rel = PathBuf::from(format!("candidates/{id}/ranking.txt"));
    let ranking_path = out_dir.join(&ranking_rel);
    fs::write(&ranking_path, ranking).map_err(|e| Error::io(&ranking_path, e))?;

    Ok(ImageEntry {
        id: id.to_string(),
        image: image_rel,
        ground_truth: gt_rel,
        candidates: cand_rel,
        ranking: Some(ranking_rel),
    })
}
