//! Dense multiscale local descriptors: enriched SIFT (eSIFT), its masked
//! variant (eMSIFT), enriched uniform-LBP histograms (eLBP), and the
//! center-in-region rule that routes descriptors into pooling regions.
//!
//! Extraction walks a fixed scan order (y-major, then x, then ascending
//! scale), so descriptor lists are bit-identical across runs and thread
//! counts.

mod lbp;
mod sift;

pub use lbp::dense_lbp;
pub use sift::dense_sift;

use std::collections::BTreeMap;
use std::io::{Read as _, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::partition::{RegionId, RegionPartition};
use crate::raster::BinaryMask;
use crate::{Error, Result};

/// The three descriptor families.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum DescriptorKind {
    ESift,
    EMSift,
    ELbp,
}

impl DescriptorKind {
    /// Feature vector length: 128 gradient bins + 4 enrichment values for
    /// the SIFT variants, 58 uniform + 1 other + 3 enrichment for eLBP.
    pub fn dim(&self) -> usize {
        match self {
            DescriptorKind::ESift | DescriptorKind::EMSift => 132,
            DescriptorKind::ELbp => 62,
        }
    }

    pub fn all() -> [DescriptorKind; 3] {
        [DescriptorKind::ESift, DescriptorKind::EMSift, DescriptorKind::ELbp]
    }
}

impl std::fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DescriptorKind::ESift => write!(f, "eSIFT"),
            DescriptorKind::EMSift => write!(f, "eMSIFT"),
            DescriptorKind::ELbp => write!(f, "eLBP"),
        }
    }
}

impl std::str::FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "esift" => Ok(DescriptorKind::ESift),
            "emsift" => Ok(DescriptorKind::EMSift),
            "elbp" => Ok(DescriptorKind::ELbp),
            other => Err(Error::InvalidParameter(format!(
                "unknown descriptor kind '{other}' (expected eSIFT, eMSIFT, or eLBP)"
            ))),
        }
    }
}

/// One dense local feature: center pixel, patch side length, and the
/// real-valued feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDescriptor {
    pub x: usize,
    pub y: usize,
    pub scale: usize,
    pub vector: Vec<f64>,
}

/// Dense sampling layout: grid stride and the patch sizes extracted at
/// every grid point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseGrid {
    stride: usize,
    scales: Vec<usize>,
}

impl DenseGrid {
    pub fn new(stride: usize, mut scales: Vec<usize>) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidParameter("grid stride must be >= 1".into()));
        }
        if scales.is_empty() {
            return Err(Error::InvalidParameter("grid needs at least one scale".into()));
        }
        if let Some(&bad) = scales.iter().find(|&&s| s < 8 || s % 2 != 0) {
            return Err(Error::InvalidParameter(format!(
                "patch scales must be even and >= 8, got {bad}"
            )));
        }
        scales.sort_unstable();
        scales.dedup();
        Ok(DenseGrid { stride, scales })
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    /// Grid centers whose patch fits inside a `width` x `height` image, in
    /// scan order (y-major, then x, then ascending scale).
    pub(crate) fn centers(&self, width: usize, height: usize) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let mut y = 0;
        while y < height {
            let mut x = 0;
            while x < width {
                for &s in &self.scales {
                    let half = s / 2;
                    if x >= half && y >= half && x + s - half <= width && y + s - half <= height {
                        out.push((x, y, s));
                    }
                }
                x += self.stride;
            }
            y += self.stride;
        }
        out
    }
}

impl Default for DenseGrid {
    fn default() -> Self {
        DenseGrid::new(4, vec![16, 24, 32]).expect("defaults are valid")
    }
}

/// Reference frame for the enrichment coordinates: the whole image for
/// unmasked descriptors, the mask bounding box for eMSIFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Frame {
    pub fn image(width: usize, height: usize) -> Frame {
        Frame { x: 0, y: 0, w: width, h: height }
    }

    /// Tight bounding box of a mask; errors on an empty mask.
    pub fn mask_bbox(mask: &BinaryMask) -> Result<Frame> {
        let (x, y, w, h) = mask.bounding_box().ok_or(Error::EmptyFigure)?;
        Ok(Frame { x, y, w, h })
    }

    /// Position/scale enrichment relative to this frame, clamped to [0,1].
    pub(crate) fn enrich(&self, x: usize, y: usize, scale: usize) -> (f64, f64, f64) {
        let rx = (x as f64 - self.x as f64) / self.w as f64;
        let ry = (y as f64 - self.y as f64) / self.h as f64;
        let rs = scale as f64 / self.w.max(self.h) as f64;
        (rx.clamp(0.0, 1.0), ry.clamp(0.0, 1.0), rs.clamp(0.0, 1.0))
    }
}

/// Routes each descriptor to the pool of the region under its center pixel.
/// Patch overlap with neighbouring regions is deliberately irrelevant.
pub fn assign_to_pools(
    descs: &[LocalDescriptor],
    part: &RegionPartition,
) -> BTreeMap<RegionId, Vec<LocalDescriptor>> {
    let mut pools: BTreeMap<RegionId, Vec<LocalDescriptor>> = BTreeMap::new();
    for d in descs {
        pools.entry(part.get(d.x, d.y)).or_default().push(d.clone());
    }
    pools
}

const DUMP_MAGIC: &[u8; 8] = b"SEGDSC01";

/// Writes descriptor vectors as little-endian f32 rows behind a 16-byte
/// header (8-byte magic, u32 row count, u32 dimension), for cross-checking
/// against external implementations.
pub fn write_descriptor_dump(path: impl AsRef<Path>, descs: &[LocalDescriptor]) -> Result<()> {
    let path = path.as_ref();
    let dim = descs.first().map_or(0, |d| d.vector.len());
    if descs.iter().any(|d| d.vector.len() != dim) {
        return Err(Error::InvalidParameter(
            "descriptor dump requires uniform vector dimension".into(),
        ));
    }
    let mut buf = Vec::with_capacity(16 + descs.len() * dim * 4);
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&(descs.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for d in descs {
        for &v in &d.vector {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads a dump written by `write_descriptor_dump`: `(dimension, rows)`.
pub fn read_descriptor_dump(path: impl AsRef<Path>) -> Result<(usize, Vec<Vec<f32>>)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::BadFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    if bytes.len() < 16 || &bytes[..8] != DUMP_MAGIC {
        return Err(bad("missing descriptor dump magic"));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + count * dim * 4 {
        return Err(bad("descriptor dump length does not match header"));
    }
    let mut rows = Vec::with_capacity(count);
    let mut off = 16;
    for _ in 0..count {
        let row = (0..dim)
            .map(|i| {
                let at = off + i * 4;
                f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
            })
            .collect();
        rows.push(row);
        off += dim * 4;
    }
    Ok((dim, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{compose_partition, SpConfig};
    use crate::raster::GrayImage;

    #[test]
    fn grid_skips_patches_that_do_not_fit() {
        let grid = DenseGrid::new(4, vec![16]).unwrap();
        let centers = grid.centers(16, 16);
        assert_eq!(centers, vec![(8, 8, 16)]);
        assert!(grid.centers(10, 10).is_empty());
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(DenseGrid::new(0, vec![16]).is_err());
        assert!(DenseGrid::new(4, vec![]).is_err());
        assert!(DenseGrid::new(4, vec![6]).is_err());
        assert!(DenseGrid::new(4, vec![15]).is_err());
    }

    #[test]
    fn scan_order_is_y_major_then_x_then_scale() {
        let grid = DenseGrid::new(8, vec![8, 16]).unwrap();
        let centers = grid.centers(40, 40);
        let mut sorted = centers.clone();
        sorted.sort_by_key(|&(x, y, s)| (y, x, s));
        assert_eq!(centers, sorted);
        assert!(centers.len() > 1);
    }

    #[test]
    fn center_rule_routes_by_region_under_center() {
        let mask = BinaryMask::from_fn(40, 40, |x, y| {
            (12..28).contains(&x) && (12..28).contains(&y)
        })
        .unwrap();
        let part = compose_partition(&mask, 3.0, SpConfig::None).unwrap();
        let img = GrayImage::constant(40, 40, 0.5).unwrap();
        let grid = DenseGrid::new(2, vec![16]).unwrap();
        let descs = dense_sift(&img, &grid, None, Frame::image(40, 40));
        let pools = assign_to_pools(&descs, &part);
        let total: usize = pools.values().map(Vec::len).sum();
        assert_eq!(total, descs.len());
        // A descriptor centered on a border pixel lands in the Border pool
        // even though its patch covers figure pixels.
        let border_pool = &pools[&RegionId::Border];
        assert!(!border_pool.is_empty());
        for d in border_pool {
            assert_eq!(part.get(d.x, d.y), RegionId::Border);
        }
    }

    #[test]
    fn all_ground_partition_pools_everything_as_ground() {
        let mut mask = BinaryMask::empty(40, 40).unwrap();
        mask.set(0, 0, true); // far from any patch center
        let part = compose_partition(&mask, 1.0, SpConfig::None).unwrap();
        let img = GrayImage::constant(40, 40, 0.2).unwrap();
        let grid = DenseGrid::new(8, vec![16]).unwrap();
        let descs = dense_sift(&img, &grid, None, Frame::image(40, 40));
        let pools = assign_to_pools(&descs, &part);
        assert_eq!(pools.len(), 1);
        assert_eq!(pools[&RegionId::Ground].len(), descs.len());
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_fn(24, 24, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0).unwrap();
        let grid = DenseGrid::new(8, vec![16]).unwrap();
        let descs = dense_sift(&img, &grid, None, Frame::image(24, 24));
        assert!(!descs.is_empty());
        let path = dir.path().join("d.bin");
        write_descriptor_dump(&path, &descs).unwrap();
        let (dim, rows) = read_descriptor_dump(&path).unwrap();
        assert_eq!(dim, 132);
        assert_eq!(rows.len(), descs.len());
        for (row, d) in rows.iter().zip(&descs) {
            for (a, b) in row.iter().zip(&d.vector) {
                assert_eq!(*a, *b as f32);
            }
        }
    }

    #[test]
    fn dump_rejects_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"not a dump").unwrap();
        assert!(matches!(
            read_descriptor_dump(&path).unwrap_err(),
            Error::BadFormat { .. }
        ));
    }
}
