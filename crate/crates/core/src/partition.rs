//! Spatial codification of an object candidate: the Figure-Border-Ground
//! partition and the two spatial pyramids over Figure (crown layers from the
//! interior distance transform, and centroid-anchored Cartesian quadrants).
//!
//! Cell membership thresholds compare exact integer squared distances, so a
//! pixel's region never depends on float rounding.

use serde::{Deserialize, Serialize};

use crate::raster::{
    dilate_disc, euclidean_distance_transform, BinaryMask, BoundaryRule, SeedSet,
};
use crate::{Error, Result};

/// Label of one pooling region. `Figure(None)` is the undivided figure;
/// `Figure(Some(k))` is spatial-pyramid cell `k`. The derived ordering
/// (figure before cells before border before ground) is the canonical
/// concatenation order used throughout.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum RegionId {
    Figure(Option<usize>),
    Border,
    Ground,
}

impl std::fmt::Display for RegionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegionId::Figure(None) => write!(f, "F"),
            RegionId::Figure(Some(k)) => write!(f, "F{k}"),
            RegionId::Border => write!(f, "B"),
            RegionId::Ground => write!(f, "G"),
        }
    }
}

/// Spatial-pyramid scheme applied to the Figure region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpConfig {
    None,
    Crown(usize),
    Cartesian,
}

impl SpConfig {
    pub fn cell_count(&self) -> usize {
        match self {
            SpConfig::None => 0,
            SpConfig::Crown(n) => *n,
            SpConfig::Cartesian => 4,
        }
    }
}

impl std::fmt::Display for SpConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpConfig::None => write!(f, "none"),
            SpConfig::Crown(n) => write!(f, "crown{n}"),
            SpConfig::Cartesian => write!(f, "cartesian"),
        }
    }
}

/// Which side of the candidate contour the border crown occupies. The
/// default (and the only side used by the stock experiment configurations)
/// is exterior, which leaves the Figure region exactly equal to the
/// candidate mask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BorderSide {
    #[default]
    Exterior,
    Interior,
    Straddle,
}

impl std::fmt::Display for BorderSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BorderSide::Exterior => write!(f, "exterior"),
            BorderSide::Interior => write!(f, "interior"),
            BorderSide::Straddle => write!(f, "straddle"),
        }
    }
}

impl std::str::FromStr for BorderSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exterior" => Ok(BorderSide::Exterior),
            "interior" => Ok(BorderSide::Interior),
            "straddle" => Ok(BorderSide::Straddle),
            other => Err(Error::InvalidParameter(format!(
                "unknown border side `{other}` (expected exterior, interior, or straddle)"
            ))),
        }
    }
}

/// Crown-layer geometry: the maximum interior distance and the descending
/// logarithmic thresholds between layers (`d_max/2, d_max/4, ...`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    d_max: f64,
    thresholds: Vec<f64>,
}

impl LayerSpec {
    /// Halving thresholds below `d_max`: `n_layers - 1` of them.
    pub fn logarithmic(d_max: f64, n_layers: usize) -> Result<Self> {
        if !(d_max.is_finite() && d_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "d_max must be finite and positive, got {d_max}"
            )));
        }
        validate_layer_count(n_layers)?;
        let thresholds = (1..n_layers).map(|k| d_max / (1u64 << k) as f64).collect();
        Ok(LayerSpec { d_max, thresholds })
    }

    /// Layer geometry for a concrete mask: `d_max` is the maximum interior
    /// distance over the mask (seeds outside, image edge as background).
    pub fn from_mask(mask: &BinaryMask, n_layers: usize) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::EmptyFigure);
        }
        let field =
            euclidean_distance_transform(mask, SeedSet::Outside, BoundaryRule::Background)?;
        let max_sq = mask
            .iter_set()
            .map(|(x, y)| field.squared(x, y))
            .max()
            .expect("mask nonempty");
        LayerSpec::logarithmic((max_sq as f64).sqrt(), n_layers)
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

fn validate_layer_count(n_layers: usize) -> Result<()> {
    if n_layers == 0 || n_layers > 32 {
        return Err(Error::InvalidParameter(format!(
            "crown layer count must be in 1..=32, got {n_layers}"
        )));
    }
    Ok(())
}

/// Per-pixel region assignment for one candidate. Every pixel carries
/// exactly one `RegionId`; with a spatial pyramid active, figure pixels
/// carry their cell id and the undivided figure is recovered as the union.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    width: usize,
    height: usize,
    assignment: Vec<RegionId>,
    border_width: f64,
    sp_config: SpConfig,
}

impl RegionPartition {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> RegionId {
        debug_assert!(x < self.width && y < self.height);
        self.assignment[y * self.width + x]
    }

    pub fn assignment(&self) -> &[RegionId] {
        &self.assignment
    }

    pub fn border_width(&self) -> f64 {
        self.border_width
    }

    pub fn sp_config(&self) -> SpConfig {
        self.sp_config
    }

    /// Membership mask of one region. `Figure(None)` selects every
    /// figure-tagged pixel regardless of cell, so the undivided figure can
    /// be pooled alongside its cells.
    pub fn region_mask(&self, id: RegionId) -> BinaryMask {
        let bits = self
            .assignment
            .iter()
            .map(|&a| match id {
                RegionId::Figure(None) => matches!(a, RegionId::Figure(_)),
                other => a == other,
            })
            .collect();
        BinaryMask::new(self.width, self.height, bits).expect("dimensions preserved")
    }

    /// Pixel count per region id actually present in the assignment, in
    /// canonical order.
    pub fn region_counts(&self) -> Vec<(RegionId, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for &id in &self.assignment {
            *counts.entry(id).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }

    /// Renders the assignment as an indexed PNG: ground black, border gray,
    /// undivided figure white, SP cells in distinct hues.
    pub fn save_png(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        const CELL_HUES: [[u8; 3]; 8] = [
            [230, 25, 75],
            [60, 180, 75],
            [255, 225, 25],
            [0, 130, 200],
            [245, 130, 48],
            [145, 30, 180],
            [70, 240, 240],
            [240, 50, 230],
        ];
        let mut palette = vec![0, 0, 0, 128, 128, 128, 255, 255, 255];
        for hue in CELL_HUES {
            palette.extend_from_slice(&hue);
        }
        let indices: Vec<u8> = self
            .assignment
            .iter()
            .map(|&id| match id {
                RegionId::Ground => 0,
                RegionId::Border => 1,
                RegionId::Figure(None) => 2,
                RegionId::Figure(Some(k)) => 3 + (k % CELL_HUES.len()) as u8,
            })
            .collect();

        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder =
            png::Encoder::new(std::io::BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Indexed);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_palette(palette);
        let mut writer = encoder.write_header().map_err(|e| Error::Png {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        writer.write_image_data(&indices).map_err(|e| Error::Png {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Figure-Border-Ground partition with an exterior border crown:
/// Figure = mask, Border = dilation minus mask, Ground = the rest.
pub fn fbg_partition(mask: &BinaryMask, border_width: f64) -> Result<RegionPartition> {
    fbg_partition_sided(mask, border_width, BorderSide::Exterior)
}

/// Figure-Border-Ground partition with a configurable border side. With
/// `Interior` the crown is carved out of the mask (Figure shrinks); with
/// `Straddle` half the width lies on each side of the contour.
pub fn fbg_partition_sided(
    mask: &BinaryMask,
    border_width: f64,
    side: BorderSide,
) -> Result<RegionPartition> {
    compose_partition_sided(mask, border_width, side, SpConfig::None)
}

/// Crown-layer spatial pyramid over the mask: figure pixels are assigned to
/// `n_layers` cells by logarithmic thresholds on the interior distance
/// transform (cell 0 innermost); non-figure pixels are Ground.
pub fn crown_layers(mask: &BinaryMask, n_layers: usize) -> Result<RegionPartition> {
    validate_layer_count(n_layers)?;
    if mask.is_empty() {
        return Err(Error::EmptyFigure);
    }
    let cells = crown_cell_assignment(mask, n_layers)?;
    let mut assignment = vec![RegionId::Ground; mask.width() * mask.height()];
    for ((x, y), cell) in mask.iter_set().zip(cells) {
        assignment[y * mask.width() + x] = RegionId::Figure(Some(cell));
    }
    Ok(RegionPartition {
        width: mask.width(),
        height: mask.height(),
        assignment,
        border_width: 0.0,
        sp_config: SpConfig::Crown(n_layers),
    })
}

/// Cartesian spatial pyramid over the mask: figure pixels are assigned to
/// the four quadrants around the figure centroid (NW=0, NE=1, SW=2, SE=3
/// with y increasing downward; the centroid itself belongs to the east and
/// south sides); non-figure pixels are Ground.
pub fn cartesian_quadrants(mask: &BinaryMask) -> Result<RegionPartition> {
    if mask.is_empty() {
        return Err(Error::EmptyFigure);
    }
    let cells = cartesian_cell_assignment(mask);
    let mut assignment = vec![RegionId::Ground; mask.width() * mask.height()];
    for ((x, y), cell) in mask.iter_set().zip(cells) {
        assignment[y * mask.width() + x] = RegionId::Figure(Some(cell));
    }
    Ok(RegionPartition {
        width: mask.width(),
        height: mask.height(),
        assignment,
        border_width: 0.0,
        sp_config: SpConfig::Cartesian,
    })
}

/// Full per-candidate codification: Border and Ground from the F-B-G split,
/// Figure cells from the chosen spatial pyramid (or one undivided figure).
pub fn compose_partition(
    mask: &BinaryMask,
    border_width: f64,
    sp_config: SpConfig,
) -> Result<RegionPartition> {
    compose_partition_sided(mask, border_width, BorderSide::Exterior, sp_config)
}

/// `compose_partition` with a configurable border side. For non-exterior
/// sides the spatial pyramid is computed over the reduced Figure region
/// (the mask minus its interior border share).
pub fn compose_partition_sided(
    mask: &BinaryMask,
    border_width: f64,
    side: BorderSide,
    sp_config: SpConfig,
) -> Result<RegionPartition> {
    if mask.is_empty() {
        return Err(Error::EmptyFigure);
    }
    if !(border_width.is_finite() && border_width >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "border width must be finite and >= 0, got {border_width}"
        )));
    }
    if let SpConfig::Crown(n) = sp_config {
        validate_layer_count(n)?;
    }

    let (figure, border) = split_border(mask, border_width, side)?;

    let w = mask.width();
    let h = mask.height();
    let mut assignment = vec![RegionId::Ground; w * h];
    for (x, y) in border.iter_set() {
        assignment[y * w + x] = RegionId::Border;
    }
    if figure.is_empty() {
        // An interior border can consume a thin object entirely; the
        // partition is still valid, with every figure cell empty.
        return Ok(RegionPartition {
            width: w,
            height: h,
            assignment,
            border_width,
            sp_config,
        });
    }

    match sp_config {
        SpConfig::None => {
            for (x, y) in figure.iter_set() {
                assignment[y * w + x] = RegionId::Figure(None);
            }
        }
        SpConfig::Crown(n) => {
            let cells = crown_cell_assignment(&figure, n)?;
            for ((x, y), cell) in figure.iter_set().zip(cells) {
                assignment[y * w + x] = RegionId::Figure(Some(cell));
            }
        }
        SpConfig::Cartesian => {
            let cells = cartesian_cell_assignment(&figure);
            for ((x, y), cell) in figure.iter_set().zip(cells) {
                assignment[y * w + x] = RegionId::Figure(Some(cell));
            }
        }
    }
    Ok(RegionPartition {
        width: w,
        height: h,
        assignment,
        border_width,
        sp_config,
    })
}

/// Splits the image into (figure, border) membership according to the
/// border side; ground is everything else.
fn split_border(
    mask: &BinaryMask,
    border_width: f64,
    side: BorderSide,
) -> Result<(BinaryMask, BinaryMask)> {
    let w = mask.width();
    let h = mask.height();
    let exterior_crown = |radius: f64| -> Result<BinaryMask> {
        let dilated = dilate_disc(mask, radius)?;
        BinaryMask::from_fn(w, h, |x, y| dilated.get(x, y) && !mask.get(x, y))
    };
    let interior_crown = |radius: f64| -> Result<BinaryMask> {
        let field =
            euclidean_distance_transform(mask, SeedSet::Outside, BoundaryRule::Background)?;
        BinaryMask::from_fn(w, h, |x, y| {
            mask.get(x, y) && field.distance(x, y) <= radius
        })
    };
    match side {
        BorderSide::Exterior => Ok((mask.clone(), exterior_crown(border_width)?)),
        BorderSide::Interior => {
            let inner = interior_crown(border_width)?;
            let figure = BinaryMask::from_fn(w, h, |x, y| mask.get(x, y) && !inner.get(x, y))?;
            Ok((figure, inner))
        }
        BorderSide::Straddle => {
            let half = border_width / 2.0;
            let outer = exterior_crown(half)?;
            let inner = interior_crown(half)?;
            let figure = BinaryMask::from_fn(w, h, |x, y| mask.get(x, y) && !inner.get(x, y))?;
            let border = BinaryMask::from_fn(w, h, |x, y| outer.get(x, y) || inner.get(x, y))?;
            Ok((figure, border))
        }
    }
}

/// Crown cell index per figure pixel, in `iter_set` order. Cell `k` holds
/// interior distances in `(d_max/2^(k+1), d_max/2^k]`; the last cell keeps
/// the remainder down to zero. Comparisons stay in integers:
/// `d > d_max/2^(k+1)` is `s * 4^(k+1) > s_max` on squared distances.
fn crown_cell_assignment(figure: &BinaryMask, n_layers: usize) -> Result<Vec<usize>> {
    let field =
        euclidean_distance_transform(figure, SeedSet::Outside, BoundaryRule::Background)?;
    let max_sq = figure
        .iter_set()
        .map(|(x, y)| field.squared(x, y))
        .max()
        .expect("figure nonempty") as u128;
    let cells = figure
        .iter_set()
        .map(|(x, y)| {
            let s = field.squared(x, y) as u128;
            (0..n_layers - 1)
                .find(|k| s << (2 * (k + 1)) > max_sq)
                .unwrap_or(n_layers - 1)
        })
        .collect();
    Ok(cells)
}

/// Quadrant index per figure pixel, in `iter_set` order. The centroid
/// comparison `x >= sum_x / n` is evaluated as `x * n >= sum_x` so ties are
/// exact.
fn cartesian_cell_assignment(figure: &BinaryMask) -> Vec<usize> {
    let mut sum_x = 0u128;
    let mut sum_y = 0u128;
    let mut n = 0u128;
    for (x, y) in figure.iter_set() {
        sum_x += x as u128;
        sum_y += y as u128;
        n += 1;
    }
    figure
        .iter_set()
        .map(|(x, y)| {
            let east = (x as u128) * n >= sum_x;
            let south = (y as u128) * n >= sum_y;
            match (east, south) {
                (false, false) => 0, // NW
                (true, false) => 1,  // NE
                (false, true) => 2,  // SW
                (true, true) => 3,   // SE
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::testutil::{mask_from_rows, random_mask};

    fn square_mask() -> BinaryMask {
        // 4x4 foreground square covering rows/cols 3..6 of a 10x10 grid.
        BinaryMask::from_fn(10, 10, |x, y| (3..=6).contains(&x) && (3..=6).contains(&y)).unwrap()
    }

    fn count(p: &RegionPartition, id: RegionId) -> usize {
        p.region_mask(id).count()
    }

    #[test]
    fn full_image_mask_has_no_border_or_ground() {
        let mask = BinaryMask::full(8, 6).unwrap();
        let p = fbg_partition(&mask, 5.0).unwrap();
        assert_eq!(count(&p, RegionId::Figure(None)), 48);
        assert_eq!(count(&p, RegionId::Border), 0);
        assert_eq!(count(&p, RegionId::Ground), 0);
    }

    #[test]
    fn single_pixel_border_is_punctured_disc() {
        let mut mask = BinaryMask::empty(30, 30).unwrap();
        mask.set(10, 10, true);
        let p = fbg_partition(&mask, 5.0).unwrap();
        assert_eq!(count(&p, RegionId::Figure(None)), 1);
        assert_eq!(count(&p, RegionId::Border), 80);
        assert_eq!(count(&p, RegionId::Ground), 900 - 81);
    }

    #[test]
    fn square_crown_clips_at_image_bounds() {
        let p = fbg_partition(&square_mask(), 5.0).unwrap();
        assert_eq!(count(&p, RegionId::Figure(None)), 16);
        assert_eq!(count(&p, RegionId::Border), 84);
        assert_eq!(count(&p, RegionId::Ground), 0);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let empty = BinaryMask::empty(5, 5).unwrap();
        assert!(matches!(
            fbg_partition(&empty, 5.0).unwrap_err(),
            Error::EmptyFigure
        ));
        assert!(matches!(
            crown_layers(&empty, 4).unwrap_err(),
            Error::EmptyFigure
        ));
        assert!(matches!(
            cartesian_quadrants(&empty).unwrap_err(),
            Error::EmptyFigure
        ));
    }

    #[test]
    fn single_pixel_crown_lands_in_innermost_cell() {
        let mut mask = BinaryMask::empty(9, 9).unwrap();
        mask.set(4, 4, true);
        let p = crown_layers(&mask, 4).unwrap();
        assert_eq!(count(&p, RegionId::Figure(Some(0))), 1);
        for k in 1..4 {
            assert_eq!(count(&p, RegionId::Figure(Some(k))), 0);
        }
    }

    #[test]
    fn disc_radius_eight_crown_cell_counts() {
        // Digital disc of radius 8 centered in a 21x21 grid. Its maximum
        // interior distance is sqrt(65) (nearest outside pixel from the
        // center sits at offset (1,8)). Cell counts frozen from an
        // independent brute-force enumeration.
        let mask = BinaryMask::from_fn(21, 21, |x, y| {
            let (dx, dy) = (x as i64 - 10, y as i64 - 10);
            dx * dx + dy * dy <= 64
        })
        .unwrap();
        assert_eq!(mask.count(), 197);
        let spec = LayerSpec::from_mask(&mask, 4).unwrap();
        assert_eq!(spec.d_max(), 65f64.sqrt());

        let p = crown_layers(&mask, 4).unwrap();
        let counts: Vec<usize> = (0..4).map(|k| count(&p, RegionId::Figure(Some(k)))).collect();
        assert_eq!(counts, vec![53, 60, 40, 44]);
    }

    #[test]
    fn crown_cells_tile_the_figure() {
        for seed in 0..20u64 {
            let mask = random_mask(24, 18, 0.35, seed);
            if mask.is_empty() {
                continue;
            }
            for n in [1usize, 2, 4, 6] {
                let p = crown_layers(&mask, n).unwrap();
                let cell_total: usize =
                    (0..n).map(|k| count(&p, RegionId::Figure(Some(k)))).sum();
                assert_eq!(cell_total, mask.count());
                assert_eq!(p.region_mask(RegionId::Figure(None)), mask);
            }
        }
    }

    #[test]
    fn crown_cells_are_monotone_in_depth() {
        for seed in 0..10u64 {
            let mask = random_mask(20, 20, 0.5, seed);
            if mask.is_empty() {
                continue;
            }
            let n = 4;
            let p = crown_layers(&mask, n).unwrap();
            let field =
                euclidean_distance_transform(&mask, SeedSet::Outside, BoundaryRule::Background)
                    .unwrap();
            // min distance in cell k must exceed max distance in cell k+1.
            let mut min_sq = vec![u64::MAX; n];
            let mut max_sq = vec![0u64; n];
            for (x, y) in mask.iter_set() {
                if let RegionId::Figure(Some(k)) = p.get(x, y) {
                    min_sq[k] = min_sq[k].min(field.squared(x, y));
                    max_sq[k] = max_sq[k].max(field.squared(x, y));
                }
            }
            for k in 0..n - 1 {
                if min_sq[k] != u64::MAX && max_sq[k + 1] != 0 {
                    assert!(min_sq[k] > max_sq[k + 1], "seed {seed} cell {k}");
                }
            }
        }
    }

    #[test]
    fn square_quadrants_are_symmetric() {
        let p = cartesian_quadrants(&square_mask()).unwrap();
        for k in 0..4 {
            assert_eq!(count(&p, RegionId::Figure(Some(k))), 4);
        }
    }

    #[test]
    fn single_pixel_is_its_own_centroid_and_goes_southeast() {
        let mut mask = BinaryMask::empty(12, 12).unwrap();
        mask.set(7, 3, true);
        let p = cartesian_quadrants(&mask).unwrap();
        assert_eq!(p.get(7, 3), RegionId::Figure(Some(3)));
    }

    #[test]
    fn l_shape_quadrants() {
        // Pixels (x,y): (0,0),(0,1),(0,2),(1,2); centroid (0.25, 1.25).
        let mask = mask_from_rows(&["10", "10", "11"]);
        let p = cartesian_quadrants(&mask).unwrap();
        assert_eq!(p.get(0, 0), RegionId::Figure(Some(0))); // NW
        assert_eq!(p.get(0, 1), RegionId::Figure(Some(0))); // NW
        assert_eq!(p.get(0, 2), RegionId::Figure(Some(2))); // SW
        assert_eq!(p.get(1, 2), RegionId::Figure(Some(3))); // SE
        assert_eq!(count(&p, RegionId::Figure(Some(1))), 0); // NE empty
    }

    #[test]
    fn quadrant_centroid_recomputes_exactly() {
        for seed in 30..45u64 {
            let mask = random_mask(19, 23, 0.3, seed);
            if mask.is_empty() {
                continue;
            }
            let p = cartesian_quadrants(&mask).unwrap();
            let union = BinaryMask::from_fn(19, 23, |x, y| {
                matches!(p.get(x, y), RegionId::Figure(Some(_)))
            })
            .unwrap();
            assert_eq!(union, mask);
            let (sx, sy, n) = mask
                .iter_set()
                .fold((0u64, 0u64, 0u64), |(sx, sy, n), (x, y)| {
                    (sx + x as u64, sy + y as u64, n + 1)
                });
            let (ux, uy, un) = union
                .iter_set()
                .fold((0u64, 0u64, 0u64), |(sx, sy, n), (x, y)| {
                    (sx + x as u64, sy + y as u64, n + 1)
                });
            assert_eq!((sx, sy, n), (ux, uy, un));
        }
    }

    #[test]
    fn compose_none_matches_fbg() {
        let mask = square_mask();
        let a = fbg_partition(&mask, 5.0).unwrap();
        let b = compose_partition(&mask, 5.0, SpConfig::None).unwrap();
        assert_eq!(a.assignment(), b.assignment());
    }

    #[test]
    fn compose_cartesian_keeps_border_and_ground() {
        let mask = square_mask();
        let p = compose_partition(&mask, 5.0, SpConfig::Cartesian).unwrap();
        for k in 0..4 {
            assert_eq!(count(&p, RegionId::Figure(Some(k))), 4);
        }
        assert_eq!(count(&p, RegionId::Border), 84);
        assert_eq!(count(&p, RegionId::Ground), 0);
    }

    #[test]
    fn compose_crown_on_single_pixel() {
        let mut mask = BinaryMask::empty(30, 30).unwrap();
        mask.set(10, 10, true);
        let p = compose_partition(&mask, 5.0, SpConfig::Crown(4)).unwrap();
        assert_eq!(count(&p, RegionId::Figure(Some(0))), 1);
        assert_eq!(count(&p, RegionId::Border), 80);
    }

    #[test]
    fn every_pixel_has_exactly_one_region() {
        for seed in 50..70u64 {
            let mask = random_mask(16, 16, 0.25, seed);
            if mask.is_empty() {
                continue;
            }
            for sp in [SpConfig::None, SpConfig::Crown(4), SpConfig::Cartesian] {
                let p = compose_partition(&mask, 3.0, sp).unwrap();
                // Assignment is total by construction; check the region
                // masks partition the image.
                let f = count(&p, RegionId::Figure(None));
                let b = count(&p, RegionId::Border);
                let g = count(&p, RegionId::Ground);
                assert_eq!(f + b + g, 16 * 16, "seed {seed}");
                assert_eq!(f, mask.count());
            }
        }
    }

    #[test]
    fn border_width_law_matches_distance_transform() {
        for seed in 70..85u64 {
            let mask = random_mask(18, 14, 0.2, seed);
            if mask.is_empty() {
                continue;
            }
            let bw = 2.5;
            let p = fbg_partition(&mask, bw).unwrap();
            let field =
                euclidean_distance_transform(&mask, SeedSet::Inside, BoundaryRule::Ignore)
                    .unwrap();
            for y in 0..14 {
                for x in 0..18 {
                    let is_border = p.get(x, y) == RegionId::Border;
                    let within = !mask.get(x, y) && field.distance(x, y) <= bw;
                    assert_eq!(is_border, within, "seed {seed} at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn partition_is_translation_equivariant() {
        let mask = mask_from_rows(&[
            "0000000000000000",
            "0000011100000000",
            "0000011110000000",
            "0000001111000000",
            "0000000110000000",
            "0000000000000000",
        ]);
        // Embed with ample margin so neither crown nor border clips.
        let big = BinaryMask::from_fn(40, 30, |x, y| {
            x >= 8 && y >= 8 && x - 8 < 16 && y - 8 < 6 && mask.get(x - 8, y - 8)
        })
        .unwrap();
        let moved = big.translated(3, 5);
        for sp in [SpConfig::None, SpConfig::Crown(3), SpConfig::Cartesian] {
            let p0 = compose_partition(&big, 2.0, sp).unwrap();
            let p1 = compose_partition(&moved, 2.0, sp).unwrap();
            for y in 0..30 {
                for x in 0..40 {
                    let (sx, sy) = (x as isize - 3, y as isize - 5);
                    if (0..40).contains(&sx) && (0..30).contains(&sy) {
                        let src = p0.get(sx as usize, sy as usize);
                        if src != RegionId::Ground || p1.get(x, y) != RegionId::Ground {
                            assert_eq!(src, p1.get(x, y), "sp {sp:?} at ({x},{y})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn interior_border_shrinks_figure() {
        let mask = BinaryMask::from_fn(20, 20, |x, y| {
            (5..15).contains(&x) && (5..15).contains(&y)
        })
        .unwrap();
        let p = fbg_partition_sided(&mask, 2.0, BorderSide::Interior).unwrap();
        let f = count(&p, RegionId::Figure(None));
        let b = count(&p, RegionId::Border);
        assert_eq!(f + b, 100); // border carved out of the mask
        assert!(f > 0 && b > 0);
        // interior pixels at depth <= 2 are border: ring of width 2.
        assert_eq!(b, 100 - 36);

        let s = fbg_partition_sided(&mask, 2.0, BorderSide::Straddle).unwrap();
        let bf = count(&s, RegionId::Figure(None));
        let bb = count(&s, RegionId::Border);
        assert!(bf + bb > 100); // straddle takes pixels from both sides
    }

    #[test]
    fn layer_spec_thresholds_halve() {
        let spec = LayerSpec::logarithmic(8.0, 4).unwrap();
        assert_eq!(spec.thresholds(), &[4.0, 2.0, 1.0]);
        assert!(LayerSpec::logarithmic(0.0, 4).is_err());
        assert!(LayerSpec::logarithmic(8.0, 0).is_err());
    }

    #[test]
    fn partition_png_renders() {
        let dir = tempfile::tempdir().unwrap();
        let p = compose_partition(&square_mask(), 2.0, SpConfig::Cartesian).unwrap();
        let path = dir.path().join("p.png");
        p.save_png(&path).unwrap();
        assert!(path.metadata().unwrap().len() > 0);
    }
}
