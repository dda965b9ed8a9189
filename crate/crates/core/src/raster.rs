//! Pixel-grid primitives: gray images, binary masks, exact Euclidean distance
//! transforms, and disc dilation.
//!
//! Distances are center-to-center in pixel units. The distance transform is
//! exact: squared distances are computed in integer arithmetic and only the
//! final value takes a square root, so thresholds on distances (crown layers,
//! dilation radii) are reproducible bit-for-bit.

use std::path::Path;

use crate::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(
                "image intensities must be finite and in [0, 1]".into(),
            ));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Loads an 8-bit PNG; multi-channel inputs are converted to luma first.
    /// Stored intensity is `value / 255`.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Png {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
            .into_luma8();
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        GrayImage::new(w as usize, h as usize, data)
    }

    /// Writes an 8-bit gray PNG with `round(value * 255)` per pixel.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer sized from dimensions");
        buf.save(path).map_err(|e| Error::Png {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Row-major binary membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "mask dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        BinaryMask::new(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        BinaryMask::new(width, height, vec![true; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of member pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Member pixel coordinates in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Tight bounding box `(x0, y0, w, h)` of the member pixels, or `None`
    /// when the mask is empty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let (mut x0, mut y0) = (usize::MAX, usize::MAX);
        let (mut x1, mut y1) = (0usize, 0usize);
        let mut any = false;
        for (x, y) in self.iter_set() {
            any = true;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        any.then(|| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    /// Mask shifted by integer offsets, clipped to the original frame.
    pub fn translated(&self, dx: isize, dy: isize) -> BinaryMask {
        let mut out = vec![false; self.width * self.height];
        for (x, y) in self.iter_set() {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                out[ny as usize * self.width + nx as usize] = true;
            }
        }
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: out,
        }
    }

    /// Loads an 8-bit PNG; any nonzero sample marks a member pixel.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Png {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
            .into_luma8();
        let (w, h) = img.dimensions();
        let bits = img.as_raw().iter().map(|&v| v != 0).collect();
        BinaryMask::new(w as usize, h as usize, bits)
    }

    /// Writes members as 255 and non-members as 0 in an 8-bit gray PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer sized from dimensions");
        buf.save(path).map_err(|e| Error::Png {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Exact Euclidean distances from each pixel center to the nearest seed
/// pixel center. Squared distances are integers; `distance` takes the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    squared: Vec<u64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn squared(&self, x: usize, y: usize) -> u64 {
        debug_assert!(x < self.width && y < self.height);
        self.squared[y * self.width + x]
    }

    #[inline]
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        (self.squared(x, y) as f64).sqrt()
    }

    pub fn squared_data(&self) -> &[u64] {
        &self.squared
    }

    pub fn max_squared(&self) -> u64 {
        self.squared.iter().copied().max().unwrap_or(0)
    }
}

/// Which pixels act as distance-zero seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSet {
    /// Mask member pixels are seeds (exterior distances).
    Inside,
    /// Non-member pixels are seeds (interior distances).
    Outside,
}

/// How the image boundary is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    /// Virtual pixels one step outside the image count as outside-mask
    /// pixels (an object touching the edge is bounded by background there).
    Background,
    /// Virtual pixels do not exist; only real grid pixels can seed.
    Ignore,
}

/// Exact Euclidean distance transform of `mask`.
///
/// With `SeedSet::Outside` and `BoundaryRule::Background`, a one-pixel ring
/// of virtual background outside the image also seeds the transform, so an
/// all-member mask still has a well-defined interior distance.
pub fn euclidean_distance_transform(
    mask: &BinaryMask,
    seeds: SeedSet,
    boundary: BoundaryRule,
) -> Result<DistanceField> {
    let pad = matches!(
        (seeds, boundary),
        (SeedSet::Outside, BoundaryRule::Background)
    );
    let seed_bit = |member: bool| match seeds {
        SeedSet::Inside => member,
        SeedSet::Outside => !member,
    };

    let (w, h) = if pad {
        (mask.width + 2, mask.height + 2)
    } else {
        (mask.width, mask.height)
    };
    let mut is_seed = vec![false; w * h];
    if pad {
        for i in 0..w * h {
            let (x, y) = (i % w, i / w);
            let interior =
                x >= 1 && y >= 1 && x <= mask.width && y <= mask.height;
            is_seed[i] = if interior {
                seed_bit(mask.get(x - 1, y - 1))
            } else {
                true // virtual ring is outside-mask, and outside pixels seed
            };
        }
    } else {
        for i in 0..w * h {
            is_seed[i] = seed_bit(mask.bits[i]);
        }
    }
    if !is_seed.iter().any(|&s| s) {
        return Err(Error::NoSeeds);
    }

    let squared = separable_squared_edt(&is_seed, w, h);

    let squared = if pad {
        let mut out = Vec::with_capacity(mask.width * mask.height);
        for y in 0..mask.height {
            let row = (y + 1) * w + 1;
            out.extend_from_slice(&squared[row..row + mask.width]);
        }
        out
    } else {
        squared
    };
    Ok(DistanceField {
        width: mask.width,
        height: mask.height,
        squared,
    })
}

// Sentinel row distance for rows that contain no seed. Its square must
// exceed any true squared distance on the grid.
fn row_sentinel(w: usize, h: usize) -> u64 {
    (w + h + 2) as u64
}

/// Two-pass separable exact EDT on a seed grid, in squared integer units.
///
/// Pass 1 finds, per row, the horizontal distance to the nearest seed in the
/// same row. Pass 2 takes, per column, the lower envelope of the parabolas
/// `(y - y')^2 + g(y')^2`. Envelope breakpoints are compared as exact
/// rationals, so the output is the true squared distance with no float
/// rounding anywhere.
fn separable_squared_edt(is_seed: &[bool], w: usize, h: usize) -> Vec<u64> {
    let inf = row_sentinel(w, h);

    // Pass 1: per-row horizontal distance to the nearest seed.
    let mut g = vec![inf; w * h];
    for y in 0..h {
        let row = y * w;
        let mut run = inf;
        for x in 0..w {
            run = if is_seed[row + x] {
                0
            } else {
                run.saturating_add(1).min(inf)
            };
            g[row + x] = run;
        }
        run = g[row + w - 1];
        for x in (0..w).rev() {
            run = if is_seed[row + x] {
                0
            } else {
                run.saturating_add(1).min(inf)
            };
            g[row + x] = g[row + x].min(run);
            run = g[row + x];
        }
    }

    // Pass 2: per-column lower envelope over f(y) = g(y)^2.
    let mut out = vec![0u64; w * h];
    let mut f = vec![0i128; h];
    let mut sites = vec![0usize; h];
    // Breakpoint between envelope segments, stored as a rational num/den
    // with den > 0; index 0 is an implicit -infinity.
    let mut bp = vec![(0i128, 0i128); h + 1];

    for x in 0..w {
        for y in 0..h {
            let v = g[y * w + x] as i128;
            f[y] = v * v;
        }

        let mut k = 0usize;
        sites[0] = 0;
        bp[0] = (-1, 0); // -infinity
        bp[1] = (1, 0); // +infinity
        for q in 1..h {
            let mut s = intersect(&f, sites[k], q);
            while rational_le(s, bp[k]) {
                k -= 1;
                s = intersect(&f, sites[k], q);
            }
            k += 1;
            sites[k] = q;
            bp[k] = s;
            bp[k + 1] = (1, 0);
        }

        let mut k = 0usize;
        for y in 0..h {
            while rational_lt_int(bp[k + 1], y as i128) {
                k += 1;
            }
            let site = sites[k] as i128;
            let dy = y as i128 - site;
            out[y * w + x] = (dy * dy + f[sites[k]]) as u64;
        }
    }
    out
}

/// Breakpoint of parabolas rooted at rows `q < r`: the exact rational
/// `((f[r] + r^2) - (f[q] + q^2)) / (2r - 2q)`.
fn intersect(f: &[i128], q: usize, r: usize) -> (i128, i128) {
    let (qi, ri) = (q as i128, r as i128);
    ((f[r] + ri * ri) - (f[q] + qi * qi), 2 * (ri - qi))
}

/// `a <= b` for rationals with positive denominators; `den == 0` encodes
/// the infinity with the sign of `num`.
fn rational_le(a: (i128, i128), b: (i128, i128)) -> bool {
    match (a.1, b.1) {
        (0, _) if a.0 < 0 => true,
        (0, 0) => b.0 > 0,
        (0, _) => false,
        (_, 0) => b.0 > 0,
        _ => a.0 * b.1 <= b.0 * a.1,
    }
}

/// `a < y` for a rational breakpoint and an integer query row.
fn rational_lt_int(a: (i128, i128), y: i128) -> bool {
    if a.1 == 0 {
        a.0 < 0
    } else {
        a.0 < y * a.1
    }
}

/// Pixels within Euclidean distance `radius` of the input mask, clipped at
/// image bounds. An empty mask dilates to an empty mask.
pub fn dilate_disc(mask: &BinaryMask, radius: f64) -> Result<BinaryMask> {
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "dilation radius must be finite and >= 0, got {radius}"
        )));
    }
    if mask.is_empty() {
        return Ok(mask.clone());
    }
    let field = euclidean_distance_transform(mask, SeedSet::Inside, BoundaryRule::Ignore)?;
    let bits = field
        .squared_data()
        .iter()
        .map(|&sq| (sq as f64).sqrt() <= radius)
        .collect();
    BinaryMask::new(mask.width, mask.height, bits)
}
