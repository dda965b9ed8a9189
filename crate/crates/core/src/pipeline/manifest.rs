//! Dataset manifests: a versioned JSON index of images, ground-truth label
//! maps, and per-image candidate directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayImage};

use super::labelmap::{LabelMap, VOID};

/// Current manifest schema version.
pub const MANIFEST_SCHEMA: u32 = 1;

/// Default per-image cap on the number of candidates kept.
pub const DEFAULT_CANDIDATE_CAP: usize = 150;

/// On-disk JSON layout of a manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ManifestFile {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_cap: Option<usize>,
    pub splits: BTreeMap<String, Vec<String>>,
    pub images: Vec<ImageEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ImageEntry {
    pub id: String,
    pub image: PathBuf,
    pub ground_truth: PathBuf,
    pub candidates: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<PathBuf>,
}

/// One image of a dataset, with every path resolved and every candidate
/// discovered (and capped) at load time.
#[derive(Debug, Clone)]
pub struct ImageRecord {
    pub id: String,
    pub image: PathBuf,
    pub ground_truth: PathBuf,
    pub candidate_dir: PathBuf,
    candidates: Vec<(String, PathBuf)>,
}

impl ImageRecord {
    /// Candidate `(id, mask path)` pairs in rank order, best first.
    pub fn candidates(&self) -> &[(String, PathBuf)] {
        &self.candidates
    }
}

/// A validated dataset: category table, split lists, and image records.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    root: PathBuf,
    categories: Vec<String>,
    candidate_cap: usize,
    splits: BTreeMap<String, Vec<String>>,
    images: BTreeMap<String, ImageRecord>,
}

impl DatasetManifest {
    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Category names; index 0 is background. Index 255 is implicitly void
    /// and never appears in the table.
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn candidate_cap(&self) -> usize {
        self.candidate_cap
    }

    pub fn splits(&self) -> &BTreeMap<String, Vec<String>> {
        &self.splits
    }

    /// Image ids of a split; a missing split reads as empty.
    pub fn split(&self, name: &str) -> &[String] {
        self.splits.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn images(&self) -> &BTreeMap<String, ImageRecord> {
        &self.images
    }

    pub fn image(&self, id: &str) -> Result<&ImageRecord> {
        self.images
            .get(id)
            .ok_or_else(|| Error::Manifest(format!("unknown image id `{id}`")))
    }
}

/// One object candidate: a nonempty binary mask plus its rank in the
/// per-image candidate ordering. Features, scores, and training targets
/// are filled in lazily by later stages.
#[derive(Debug, Clone)]
pub struct CandidateRecord {
    pub id: String,
    pub mask: BinaryMask,
    pub rank: usize,
    pub feature: Option<Vec<f64>>,
    pub scores: Option<Vec<f64>>,
    pub targets: Option<Vec<f64>>,
}

impl CandidateRecord {
    pub fn new(id: impl Into<String>, mask: BinaryMask, rank: usize) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::EmptyFigure);
        }
        Ok(CandidateRecord {
            id: id.into(),
            mask,
            rank,
            feature: None,
            scores: None,
            targets: None,
        })
    }
}

/// Fully loaded pixel data for one image record.
#[derive(Debug, Clone)]
pub struct ImageData {
    pub id: String,
    pub image: GrayImage,
    pub ground_truth: LabelMap,
    pub candidates: Vec<CandidateRecord>,
}

fn exists_or_missing(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingFile(path.to_path_buf()))
    }
}

/// Loads and validates a manifest: schema version, category table, image
/// records (all referenced files must exist), candidate discovery, and
/// split membership.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ManifestFile = serde_json::from_str(&text)?;

    if file.schema != MANIFEST_SCHEMA {
        return Err(Error::Manifest(format!(
            "unsupported manifest schema {} (this build reads schema {MANIFEST_SCHEMA})",
            file.schema
        )));
    }

    validate_categories(&file.categories)?;

    let candidate_cap = file.candidate_cap.unwrap_or(DEFAULT_CANDIDATE_CAP);
    if candidate_cap == 0 {
        return Err(Error::Manifest("candidate cap must be at least 1".into()));
    }

    let manifest_dir = path.parent().unwrap_or_else(|| Path::new("."));
    let root = match &file.root {
        None => manifest_dir.to_path_buf(),
        Some(r) if r.is_absolute() => r.clone(),
        Some(r) => manifest_dir.join(r),
    };

    let mut images = BTreeMap::new();
    for entry in &file.images {
        let record = resolve_image_entry(&root, entry, candidate_cap)
            .map_err(|e| e.with_context(format!("image `{}`", entry.id)))?;
        if images.insert(entry.id.clone(), record).is_some() {
            return Err(Error::DuplicateId(entry.id.clone()));
        }
    }

    for (split, ids) in &file.splits {
        let mut seen = std::collections::BTreeSet::new();
        for id in ids {
            if !images.contains_key(id) {
                return Err(Error::Manifest(format!(
                    "split `{split}` references unknown image `{id}`"
                )));
            }
            if !seen.insert(id) {
                return Err(Error::Manifest(format!(
                    "split `{split}` lists image `{id}` twice"
                )));
            }
        }
    }

    Ok(DatasetManifest {
        root,
        categories: file.categories,
        candidate_cap,
        splits: file.splits,
        images,
    })
}

fn validate_categories(categories: &[String]) -> Result<()> {
    if categories.is_empty() {
        return Err(Error::Manifest("category table is empty".into()));
    }
    if categories.len() > 255 {
        return Err(Error::Manifest(format!(
            "category table has {} entries; at most 255 fit below the void index",
            categories.len()
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for name in categories {
        if name.is_empty() {
            return Err(Error::Manifest("category table contains an empty name".into()));
        }
        if !seen.insert(name) {
            return Err(Error::Manifest(format!("duplicate category name `{name}`")));
        }
    }
    Ok(())
}

fn resolve_image_entry(
    root: &Path,
    entry: &ImageEntry,
    candidate_cap: usize,
) -> Result<ImageRecord> {
    let image = root.join(&entry.image);
    let ground_truth = root.join(&entry.ground_truth);
    let candidate_dir = root.join(&entry.candidates);
    exists_or_missing(&image)?;
    exists_or_missing(&ground_truth)?;
    exists_or_missing(&candidate_dir)?;
    if !candidate_dir.is_dir() {
        return Err(Error::Manifest(format!(
            "candidate path `{}` is not a directory",
            candidate_dir.display()
        )));
    }

    let mut candidates = match &entry.ranking {
        Some(ranking) => {
            let ranking = root.join(ranking);
            exists_or_missing(&ranking)?;
            let text = fs::read_to_string(&ranking).map_err(|e| Error::io(&ranking, e))?;
            let mut seen = std::collections::BTreeSet::new();
            let mut out = Vec::new();
            for line in text.lines() {
                let id = line.trim();
                if id.is_empty() {
                    continue;
                }
                if !seen.insert(id.to_string()) {
                    return Err(Error::DuplicateId(format!("candidate `{id}`")));
                }
                let mask_path = candidate_dir.join(format!("{id}.png"));
                exists_or_missing(&mask_path)?;
                out.push((id.to_string(), mask_path));
            }
            out
        }
        None => {
            // No ranking file: every PNG in the directory, ordered by file
            // stem, defines the ranking.
            let mut stems = Vec::new();
            let dir = fs::read_dir(&candidate_dir).map_err(|e| Error::io(&candidate_dir, e))?;
            for item in dir {
                let item = item.map_err(|e| Error::io(&candidate_dir, e))?;
                let path = item.path();
                if path.extension().and_then(|e| e.to_str()) == Some("png") {
                    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                        stems.push((stem.to_string(), path.clone()));
                    }
                }
            }
            stems.sort();
            stems
        }
    };
    candidates.truncate(candidate_cap);

    Ok(ImageRecord {
        id: entry.id.clone(),
        image,
        ground_truth,
        candidate_dir,
        candidates,
    })
}

/// Loads the pixel data behind one image record and checks the dimension
/// and label invariants that can only be verified against the files.
pub fn load_image_data(manifest: &DatasetManifest, id: &str) -> Result<ImageData> {
    let record = manifest.image(id)?;
    let attach = |e: Error| e.with_context(format!("image `{id}`"));

    let image = GrayImage::load_png(&record.image).map_err(attach)?;
    let ground_truth = LabelMap::load_png(&record.ground_truth).map_err(attach)?;
    if (ground_truth.width(), ground_truth.height()) != (image.width(), image.height()) {
        return Err(attach(Error::BadFormat {
            path: record.ground_truth.clone(),
            reason: format!(
                "ground truth is {}x{} but the image is {}x{}",
                ground_truth.width(),
                ground_truth.height(),
                image.width(),
                image.height()
            ),
        }));
    }
    let n = manifest.n_categories();
    if let Some(bad) = ground_truth
        .labels()
        .iter()
        .find(|&&l| l != VOID && (l as usize) >= n)
    {
        return Err(attach(Error::BadFormat {
            path: record.ground_truth.clone(),
            reason: format!("label {bad} outside the {n}-entry category table"),
        }));
    }

    let mut candidates = Vec::with_capacity(record.candidates().len());
    for (rank, (cid, path)) in record.candidates().iter().enumerate() {
        let attach = |e: Error| e.with_context(format!("image `{id}`, candidate `{cid}`"));
        let mask = BinaryMask::load_png(path).map_err(attach)?;
        if (mask.width(), mask.height()) != (image.width(), image.height()) {
            return Err(attach(Error::BadFormat {
                path: path.clone(),
                reason: format!(
                    "candidate mask is {}x{} but the image is {}x{}",
                    mask.width(),
                    mask.height(),
                    image.width(),
                    image.height()
                ),
            }));
        }
        if mask.is_empty() {
            return Err(attach(Error::BadFormat {
                path: path.clone(),
                reason: "candidate mask is empty".into(),
            }));
        }
        candidates.push(CandidateRecord::new(cid.clone(), mask, rank)?);
    }

    Ok(ImageData {
        id: id.to_string(),
        image,
        ground_truth,
        candidates,
    })
}

/// Serializes a manifest file to pretty JSON and writes it.
pub(crate) fn write_manifest_file(path: &Path, file: &ManifestFile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(file)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}


#[cfg(test)]
mod tests {
    use super::fixtures::write_tiny_dataset;
    use super::*;

    #[test]
    fn loads_tiny_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        let m = load_dataset(&path).unwrap();
        assert_eq!(m.categories(), ["background", "blob"]);
        assert_eq!(m.candidate_cap(), DEFAULT_CANDIDATE_CAP);
        assert_eq!(m.split("train"), ["a"]);
        assert_eq!(m.split("test"), Vec::<String>::new().as_slice());
        assert_eq!(m.split("no-such-split"), Vec::<String>::new().as_slice());
        assert_eq!(m.images().len(), 2);

        // Ranking file order wins over file-name order.
        let a = m.image("a").unwrap();
        let ids: Vec<&str> = a.candidates().iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["c1", "c0"]);

        let data = load_image_data(&m, "a").unwrap();
        assert_eq!(data.candidates.len(), 2);
        assert_eq!(data.candidates[0].id, "c1");
        assert_eq!(data.candidates[0].rank, 0);
        assert_eq!(data.candidates[1].rank, 1);
        assert_eq!(data.ground_truth.get(1, 1), 1);
        assert_eq!(data.ground_truth.get(7, 7), VOID);
    }

    #[test]
    fn candidate_cap_truncates_ranking() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v["candidate_cap"] = 1.into();
        fs::write(&path, v.to_string()).unwrap();
        let m = load_dataset(&path).unwrap();
        let a = m.image("a").unwrap();
        assert_eq!(a.candidates().len(), 1);
        assert_eq!(a.candidates()[0].0, "c1");
    }

    #[test]
    fn missing_candidate_mask_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        fs::remove_file(dir.path().join("cands/a/c0.png")).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("missing file"), "{err}");
        assert!(err.to_string().contains("c0.png"), "{err}");
    }

    #[test]
    fn duplicate_image_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let dup = v["images"][0].clone();
        v["images"].as_array_mut().unwrap().push(dup);
        fs::write(&path, v.to_string()).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(ref id) if id == "a"), "{err}");
    }

    #[test]
    fn bad_category_tables_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        let original = fs::read_to_string(&path).unwrap();

        let cases: Vec<(serde_json::Value, &str)> = vec![
            (serde_json::json!([]), "empty"),
            (serde_json::json!(["background", "background"]), "duplicate"),
            (
                serde_json::Value::Array(
                    (0..256).map(|i| serde_json::json!(format!("c{i}"))).collect(),
                ),
                "at most 255",
            ),
            (serde_json::json!(["background", ""]), "empty name"),
        ];
        for (table, needle) in cases {
            let mut v: serde_json::Value = serde_json::from_str(&original).unwrap();
            v["categories"] = table;
            fs::write(&path, v.to_string()).unwrap();
            let err = load_dataset(&path).unwrap_err();
            assert!(err.to_string().contains(needle), "wanted `{needle}` in `{err}`");
        }
    }

    #[test]
    fn unknown_split_member_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v["splits"]["train"] = serde_json::json!(["a", "ghost"]);
        fs::write(&path, v.to_string()).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");
    }

    #[test]
    fn schema_version_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v["schema"] = 99.into();
        fs::write(&path, v.to_string()).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("schema 99"), "{err}");
    }

    #[test]
    fn ground_truth_dimension_mismatch_names_image() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        LabelMap::background(4, 4)
            .save_png(dir.path().join("gt/a.png"))
            .unwrap();
        let m = load_dataset(&path).unwrap();
        let err = load_image_data(&m, "a").unwrap_err();
        assert!(err.to_string().contains("image `a`"), "{err}");
        assert!(err.to_string().contains("4x4"), "{err}");
    }

    #[test]
    fn out_of_table_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        let mut gt = LabelMap::background(8, 8);
        gt.set(0, 0, 9);
        gt.save_png(dir.path().join("gt/a.png")).unwrap();
        let m = load_dataset(&path).unwrap();
        let err = load_image_data(&m, "a").unwrap_err();
        assert!(err.to_string().contains("label 9"), "{err}");
    }

    #[test]
    fn empty_candidate_mask_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tiny_dataset(dir.path());
        BinaryMask::empty(8, 8)
            .unwrap()
            .save_png(dir.path().join("cands/b/only.png"))
            .unwrap();
        let m = load_dataset(&path).unwrap();
        let err = load_image_data(&m, "b").unwrap_err();
        assert!(err.to_string().contains("empty"), "{err}");
        assert!(err.to_string().contains("candidate `only`"), "{err}");
    }
}
