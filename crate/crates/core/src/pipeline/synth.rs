//! Synthetic directional benchmarks.
//!
//! Each generated image contains one random-ellipse object on a noise
//! background. The two foreground classes draw their interior from the
//! *same* distribution; what separates them is written either into a
//! 5-pixel exterior halo (border-signal variant) or into the spatial
//! arrangement of the interior around the object's center (quadrant-signal
//! variant). A pooling configuration can only tell the classes apart if it
//! actually looks at the region carrying the signal.
//!
//! Two details of the border-signal variant keep the class out of
//! figure-only pooling. Patches centered on interior pixels near the
//! contour unavoidably overlap the exterior halo, so (1) the class stripes
//! occupy only the *outer* shell of the halo, beyond the reach of most of
//! that overlap, and (2) the interior margin carries equally strong stripes
//! of a per-image random orientation drawn independently of the class.
//! Near-contour patches are dominated by the class-free margin texture,
//! while patches centered inside the halo sit directly on the class
//! stripes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{dilate_disc, BinaryMask, GrayImage};

use super::labelmap::{LabelMap, VOID};
use super::manifest::{load_dataset, write_manifest_file, DatasetManifest, ImageEntry, ManifestFile};

/// Side length of every generated image.
pub const SYNTH_SIDE: usize = 64;

/// Width of the painted exterior halo (border-signal variant).
pub const HALO_WIDTH: f64 = 5.0;

/// Exterior distance where the class stripes start; the halo shell closer
/// to the object is plain noise so that patches centered inside the object
/// barely reach the class texture.
const STRIPE_INNER: f64 = 3.0;

/// Depth of the interior margin that carries the nuisance stripes.
const MARGIN_DEPTH: f64 = 4.0;

const INTERIOR_BASE: f64 = 0.5;
const INTERIOR_SPREAD: f64 = 0.3;
const HALO_HI: f64 = 0.8;
const HALO_LO: f64 = 0.2;
const HALO_NOISE: f64 = 0.05;
/// Half-period of the stripe patterns, in pixels.
const HALO_BAND: usize = 2;
const QUAD_HI: f64 = 0.65;
const QUAD_LO: f64 = 0.35;
const QUAD_SPREAD: f64 = 0.2;

/// Where the class-discriminating texture lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SynthVariant {
    /// Classes differ only in the stripe orientation of the exterior halo:
    /// vertical bands for class 1, horizontal for class 2. Interiors are
    /// identically distributed noise.
    BorderSignal,
    /// Classes differ only in which diagonal pair of quadrants around the
    /// object center is bright; global interior statistics match.
    QuadrantSignal,
}

/// Generates the border-signal benchmark under `dir` and loads it back.
/// Candidates per image: the true mask plus a shifted and a rescaled copy.
/// The same seed always produces byte-identical files.
pub fn synth_border_benchmark(
    dir: impl AsRef<Path>,
    seed: u64,
    n_train: usize,
    n_test: usize,
) -> Result<DatasetManifest> {
    generate(dir.as_ref(), seed, n_train, n_test, SynthVariant::BorderSignal)
}

/// Generates the quadrant-signal variant under `dir` and loads it back.
pub fn synth_quadrant_benchmark(
    dir: impl AsRef<Path>,
    seed: u64,
    n_train: usize,
    n_test: usize,
) -> Result<DatasetManifest> {
    generate(dir.as_ref(), seed, n_train, n_test, SynthVariant::QuadrantSignal)
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
}

impl Ellipse {
    fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as f64 - self.cx) / self.a;
        let dy = (y as f64 - self.cy) / self.b;
        dx * dx + dy * dy <= 1.0
    }

    fn mask(&self) -> BinaryMask {
        BinaryMask::from_fn(SYNTH_SIDE, SYNTH_SIDE, |x, y| self.contains(x, y))
            .expect("fixed dimensions")
    }
}

fn generate(
    dir: &Path,
    seed: u64,
    n_train: usize,
    n_test: usize,
    variant: SynthVariant,
) -> Result<DatasetManifest> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidParameter(
            "benchmark needs at least one train and one test image".into(),
        ));
    }
    for sub in ["images", "gt", "candidates"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(p.clone(), e))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n_train + n_test;
    let mut entries = Vec::with_capacity(total);
    let mut ids = Vec::with_capacity(total);

    for i in 0..total {
        let id = format!("img_{i:04}");
        // Classes alternate so every split stays balanced.
        let class = 1 + (i % 2) as u8;

        let ellipse = Ellipse {
            cx: rng.gen_range(24.0..40.0),
            cy: rng.gen_range(24.0..40.0),
            a: rng.gen_range(10.0..16.0),
            b: rng.gen_range(10.0..16.0),
        };
        let mask = ellipse.mask();

        let dx = rng.gen_range(2..=4i64) * if rng.gen_bool(0.5) { 1 } else { -1 };
        let dy = rng.gen_range(2..=4i64) * if rng.gen_bool(0.5) { 1 } else { -1 };
        let shifted = mask.translated(dx as isize, dy as isize);

        let factor = if rng.gen_bool(0.5) {
            rng.gen_range(0.70..0.80)
        } else {
            rng.gen_range(1.20..1.35)
        };
        let rescaled = Ellipse {
            a: ellipse.a * factor,
            b: ellipse.b * factor,
            ..ellipse
        }
        .mask();

        // Orientation of the interior nuisance stripes: a fair coin,
        // independent of the class.
        let nuisance_vertical = rng.gen_bool(0.5);

        let halo = dilate_disc(&mask, HALO_WIDTH)?;
        let inner_halo = dilate_disc(&mask, STRIPE_INNER)?;
        let stripe_band = BinaryMask::from_fn(SYNTH_SIDE, SYNTH_SIDE, |x, y| {
            halo.get(x, y) && !inner_halo.get(x, y)
        })?;
        let outside = BinaryMask::from_fn(SYNTH_SIDE, SYNTH_SIDE, |x, y| !mask.get(x, y))?;
        let near_contour = dilate_disc(&outside, MARGIN_DEPTH)?;
        let margin = BinaryMask::from_fn(SYNTH_SIDE, SYNTH_SIDE, |x, y| {
            mask.get(x, y) && near_contour.get(x, y)
        })?;

        let paint = Paint {
            variant,
            ellipse: &ellipse,
            mask: &mask,
            stripe_band: &stripe_band,
            margin: &margin,
            class,
            nuisance_vertical,
        };
        let image = GrayImage::from_fn(SYNTH_SIDE, SYNTH_SIDE, |x, y| {
            let r = rng.gen::<f64>();
            paint.pixel(x, y, r)
        })?;

        let ring = dilate_disc(&mask, 1.0)?;
        let mut gt = LabelMap::background(SYNTH_SIDE, SYNTH_SIDE);
        for (x, y) in ring.iter_set() {
            gt.set(x, y, if mask.get(x, y) { class } else { VOID });
        }

        image.save_png(dir.join(format!("images/{id}.png")))?;
        gt.save_png(dir.join(format!("gt/{id}.png")))?;
        let cand_dir = dir.join(format!("candidates/{id}"));
        fs::create_dir_all(&cand_dir).map_err(|e| Error::io(cand_dir.clone(), e))?;
        mask.save_png(cand_dir.join("cand_0.png"))?;
        shifted.save_png(cand_dir.join("cand_1.png"))?;
        rescaled.save_png(cand_dir.join("cand_2.png"))?;
        let ranking = cand_dir.join("ranking.txt");
        fs::write(&ranking, "cand_0\ncand_1\ncand_2\n").map_err(|e| Error::io(ranking, e))?;

        entries.push(ImageEntry {
            id: id.clone(),
            image: format!("images/{id}.png").into(),
            ground_truth: format!("gt/{id}.png").into(),
            candidates: format!("candidates/{id}").into(),
            ranking: Some(format!("candidates/{id}/ranking.txt").into()),
        });
        ids.push(id);
    }

    let mut splits = BTreeMap::new();
    splits.insert("train".to_string(), ids[..n_train].to_vec());
    splits.insert("val".to_string(), ids[n_train..].to_vec());

    let manifest_path = dir.join("manifest.json");
    write_manifest_file(
        &manifest_path,
        &ManifestFile {
            schema: super::manifest::MANIFEST_SCHEMA,
            root: None,
            categories: vec!["background".into(), "class-a".into(), "class-b".into()],
            candidate_cap: None,
            splits,
            images: entries,
        },
    )?;
    load_dataset(&manifest_path)
}

/// Stripe intensity at a pixel: bands of half-period [`HALO_BAND`] that run
/// vertically (value varies with x) or horizontally (varies with y).
fn stripe(vertical: bool, x: usize, y: usize) -> f64 {
    let coord = if vertical { x } else { y };
    if (coord / HALO_BAND).is_multiple_of(2) {
        HALO_HI
    } else {
        HALO_LO
    }
}

/// Per-image painting context for one generated image.
struct Paint<'a> {
    variant: SynthVariant,
    ellipse: &'a Ellipse,
    mask: &'a BinaryMask,
    /// Outer shell of the exterior halo; carries the class stripes.
    stripe_band: &'a BinaryMask,
    /// Interior band near the contour; carries the nuisance stripes.
    margin: &'a BinaryMask,
    class: u8,
    nuisance_vertical: bool,
}

impl Paint<'_> {
    fn pixel(&self, x: usize, y: usize, r: f64) -> f64 {
        match self.variant {
            SynthVariant::BorderSignal => {
                if self.margin.get(x, y) {
                    stripe(self.nuisance_vertical, x, y) + HALO_NOISE * (r - 0.5)
                } else if self.mask.get(x, y) {
                    INTERIOR_BASE + INTERIOR_SPREAD * (r - 0.5)
                } else if self.stripe_band.get(x, y) {
                    // Class 1 stripes run vertically, class 2 horizontally.
                    stripe(self.class == 1, x, y) + HALO_NOISE * (r - 0.5)
                } else {
                    // Inner halo shell and background: plain noise.
                    r
                }
            }
            SynthVariant::QuadrantSignal => {
                if self.mask.get(x, y) {
                    let west = (x as f64) < self.ellipse.cx;
                    let north = (y as f64) < self.ellipse.cy;
                    let bright = if self.class == 1 { west == north } else { west != north };
                    let base = if bright { QUAD_HI } else { QUAD_LO };
                    base + QUAD_SPREAD * (r - 0.5)
                } else {
                    r
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn all_files(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for item in fs::read_dir(&d).unwrap() {
                let p = item.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push(p.strip_prefix(dir).unwrap().to_path_buf());
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn same_seed_produces_identical_bytes() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        synth_border_benchmark(d1.path(), 9, 2, 1).unwrap();
        synth_border_benchmark(d2.path(), 9, 2, 1).unwrap();
        let f1 = all_files(d1.path());
        let f2 = all_files(d2.path());
        assert_eq!(f1, f2);
        assert!(!f1.is_empty());
        for rel in &f1 {
            let b1 = fs::read(d1.path().join(rel)).unwrap();
            let b2 = fs::read(d2.path().join(rel)).unwrap();
            assert_eq!(b1, b2, "bytes differ for {}", rel.display());
        }

        let d3 = tempfile::tempdir().unwrap();
        synth_border_benchmark(d3.path(), 10, 2, 1).unwrap();
        let differs = f1.iter().any(|rel| {
            fs::read(d1.path().join(rel)).unwrap() != fs::read(d3.path().join(rel)).unwrap()
        });
        assert!(differs, "different seeds should differ somewhere");
    }

    #[test]
    fn manifest_layout_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_border_benchmark(dir.path(), 5, 3, 2).unwrap();
        assert_eq!(m.categories(), ["background", "class-a", "class-b"]);
        assert_eq!(m.split("train").len(), 3);
        assert_eq!(m.split("val").len(), 2);
        for id in m.split("train") {
            let data = super::super::manifest::load_image_data(&m, id).unwrap();
            assert_eq!(data.candidates.len(), 3);
            assert_eq!(data.candidates[0].id, "cand_0");
            // The true mask matches the non-void foreground of the ground
            // truth exactly.
            for (x, y) in data.candidates[0].mask.iter_set() {
                let l = data.ground_truth.get(x, y);
                assert!(l == 1 || l == 2);
            }
        }
    }

    #[test]
    fn ground_truth_has_void_ring() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_border_benchmark(dir.path(), 11, 1, 1).unwrap();
        let data = super::super::manifest::load_image_data(&m, "img_0000").unwrap();
        let mask = &data.candidates[0].mask;
        let ring = dilate_disc(mask, 1.0).unwrap();
        let mut void_count = 0;
        for y in 0..SYNTH_SIDE {
            for x in 0..SYNTH_SIDE {
                let l = data.ground_truth.get(x, y);
                if ring.get(x, y) && !mask.get(x, y) {
                    assert_eq!(l, VOID, "ring pixel ({x},{y})");
                    void_count += 1;
                } else {
                    assert_ne!(l, VOID, "non-ring pixel ({x},{y})");
                }
            }
        }
        assert!(void_count > 0);
    }

    /// Interior intensity cannot separate the classes, while the stripe
    /// orientation in the outer halo shell separates them by construction.
    /// The interior margin stripes must occur in both orientations within
    /// each class, otherwise they would leak the label.
    #[test]
    fn interior_matches_halo_separates() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_border_benchmark(dir.path(), 1, 50, 50).unwrap();

        // (sum, count) of interior intensity and of |horizontal central
        // difference| inside the stripe band, per class; plus per-class
        // counts of images whose margin stripes run vertically.
        let mut interior = [(0.0f64, 0u64); 2];
        let mut band_dx = [(0.0f64, 0u64); 2];
        let mut margin_vertical = [0u32; 2];
        let mut margin_images = [0u32; 2];
        for id in m.images().keys() {
            let data = super::super::manifest::load_image_data(&m, id).unwrap();
            let mask = &data.candidates[0].mask;
            let class = data
                .ground_truth
                .max_label()
                .expect("object present") as usize;
            let slot = class - 1;
            for (x, y) in mask.iter_set() {
                interior[slot].0 += data.image.get(x, y);
                interior[slot].1 += 1;
            }

            let halo = dilate_disc(mask, HALO_WIDTH).unwrap();
            let inner = dilate_disc(mask, STRIPE_INNER).unwrap();
            let in_band = |px: usize, py: usize| halo.get(px, py) && !inner.get(px, py);
            for (x, y) in halo.iter_set() {
                if !in_band(x, y) || x == 0 || x + 1 >= SYNTH_SIDE {
                    continue;
                }
                if in_band(x - 1, y) && in_band(x + 1, y) {
                    let d = (data.image.get(x + 1, y) - data.image.get(x - 1, y)) / 2.0;
                    band_dx[slot].0 += d.abs();
                    band_dx[slot].1 += 1;
                }
            }

            // Classify this image's margin stripe orientation from the
            // relative strength of the two central differences.
            let outside =
                BinaryMask::from_fn(SYNTH_SIDE, SYNTH_SIDE, |x, y| !mask.get(x, y)).unwrap();
            let near = dilate_disc(&outside, MARGIN_DEPTH).unwrap();
            let in_margin = |px: usize, py: usize| mask.get(px, py) && near.get(px, py);
            let (mut dx_sum, mut dy_sum, mut n) = (0.0, 0.0, 0u64);
            for (x, y) in mask.iter_set() {
                if !in_margin(x, y) || x == 0 || y == 0 || x + 1 >= SYNTH_SIDE || y + 1 >= SYNTH_SIDE
                {
                    continue;
                }
                if in_margin(x - 1, y) && in_margin(x + 1, y) && in_margin(x, y - 1) && in_margin(x, y + 1) {
                    dx_sum += (data.image.get(x + 1, y) - data.image.get(x - 1, y)).abs();
                    dy_sum += (data.image.get(x, y + 1) - data.image.get(x, y - 1)).abs();
                    n += 1;
                }
            }
            assert!(n > 0, "margin too thin to sample in {id}");
            margin_images[slot] += 1;
            if dx_sum > dy_sum {
                margin_vertical[slot] += 1;
            }
        }

        let mean = |(s, n): (f64, u64)| s / n as f64;
        let (ia, ib) = (mean(interior[0]), mean(interior[1]));
        assert!((ia - INTERIOR_BASE).abs() < 0.02, "class-a interior mean {ia}");
        assert!((ib - INTERIOR_BASE).abs() < 0.02, "class-b interior mean {ib}");
        assert!((ia - ib).abs() < 0.01, "interior gap {}", (ia - ib).abs());

        // Vertical bands make the horizontal derivative large for class 1
        // and (near) zero for class 2.
        let (ha, hb) = (mean(band_dx[0]), mean(band_dx[1]));
        assert!(ha > 0.25, "class-a band |dx| {ha}");
        assert!(hb < 0.05, "class-b band |dx| {hb}");

        // Both margin orientations occur well inside each class.
        for slot in 0..2 {
            let v = margin_vertical[slot];
            let total = margin_images[slot];
            assert!(
                v >= 5 && v + 5 <= total,
                "margin orientation confounded with class {slot}: {v}/{total} vertical"
            );
        }
    }

    #[test]
    fn quadrant_variant_places_signal_in_arrangement() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_quadrant_benchmark(dir.path(), 1, 20, 20).unwrap();

        let mut global = [(0.0f64, 0u64); 2];
        let mut nw = [(0.0f64, 0u64); 2];
        for id in m.images().keys() {
            let data = super::super::manifest::load_image_data(&m, id).unwrap();
            let mask = &data.candidates[0].mask;
            let class = data.ground_truth.max_label().unwrap() as usize;
            let slot = class - 1;
            let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
            for (x, y) in mask.iter_set() {
                sx += x as u64;
                sy += y as u64;
                n += 1;
            }
            let (cx, cy) = (sx as f64 / n as f64, sy as f64 / n as f64);
            for (x, y) in mask.iter_set() {
                let v = data.image.get(x, y);
                global[slot].0 += v;
                global[slot].1 += 1;
                if (x as f64) < cx && (y as f64) < cy {
                    nw[slot].0 += v;
                    nw[slot].1 += 1;
                }
            }
        }
        let mean = |(s, n): (f64, u64)| s / n as f64;
        // Same global interior mean...
        assert!((mean(global[0]) - mean(global[1])).abs() < 0.01);
        // ...but opposite NW-quadrant brightness.
        assert!(mean(nw[0]) > 0.55, "class-a NW {}", mean(nw[0]));
        assert!(mean(nw[1]) < 0.45, "class-b NW {}", mean(nw[1]));
    }

    #[test]
    fn zero_sizes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(synth_border_benchmark(dir.path(), 1, 0, 5).is_err());
        assert!(synth_border_benchmark(dir.path(), 1, 5, 0).is_err());
    }
}
