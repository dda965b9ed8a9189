//! Dense uniform local binary patterns: 8 bilinear-sampled neighbors at
//! radius 1, the 58 uniform patterns plus one catch-all bin, L1-normalized
//! per patch.

use std::sync::OnceLock;

use rayon::prelude::*;

use super::{DenseGrid, Frame, LocalDescriptor};
use crate::raster::GrayImage;

const UNIFORM_BINS: usize = 58;
const HIST_DIM: usize = UNIFORM_BINS + 1;

// Neighbor offsets at angles k*45 degrees (y down). The diagonal component
// is written out so that offset[k] == -offset[k+4] holds bit-for-bit, which
// makes 180-degree image rotation an exact permutation of patterns.
const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
const OFFSETS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (D, D),
    (0.0, 1.0),
    (-D, D),
    (-1.0, 0.0),
    (-D, -D),
    (0.0, -1.0),
    (D, -D),
];

/// Dense eLBP extraction over the grid: per patch, a histogram over the 58
/// uniform 8-bit patterns plus one bin for the rest, L1-normalized, with 3
/// frame-relative enrichment values appended (62 dimensions total).
pub fn dense_lbp(img: &GrayImage, grid: &DenseGrid, frame: Frame) -> Vec<LocalDescriptor> {
    grid.centers(img.width(), img.height())
        .into_par_iter()
        .map(|(cx, cy, s)| {
            let mut vector = lbp_histogram(img, cx, cy, s).to_vec();
            let (rx, ry, rs) = frame.enrich(cx, cy, s);
            vector.push(rx);
            vector.push(ry);
            vector.push(rs);
            LocalDescriptor { x: cx, y: cy, scale: s, vector }
        })
        .collect()
}

/// L1-normalized pattern histogram of one patch. Patterns are computed for
/// the patch's interior pixels (one-pixel margin keeps all neighbor samples
/// inside the patch); the tie rule maps neighbor >= center to bit 1.
pub(crate) fn lbp_histogram(img: &GrayImage, cx: usize, cy: usize, s: usize) -> [f64; HIST_DIM] {
    let x0 = cx - s / 2;
    let y0 = cy - s / 2;
    let table = uniform_bin_table();

    let mut hist = [0.0; HIST_DIM];
    for py in 1..s - 1 {
        for px in 1..s - 1 {
            let center = img.get(x0 + px, y0 + py);
            let mut pattern = 0u8;
            for (k, &(ox, oy)) in OFFSETS.iter().enumerate() {
                let sample = bilinear(img, (x0 + px) as f64 + ox, (y0 + py) as f64 + oy);
                if sample >= center {
                    pattern |= 1 << k;
                }
            }
            hist[table[pattern as usize] as usize] += 1.0;
        }
    }
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        for v in &mut hist {
            *v /= total;
        }
    }
    hist
}

/// Bilinear interpolation at a real position given in pixel-center
/// coordinates. The factored form returns the center value exactly on
/// constant neighborhoods (so the tie rule is stable there), and zero-weight
/// taps are never dereferenced (integer offsets at patch margins would
/// otherwise read past the image).
fn bilinear(img: &GrayImage, x: f64, y: f64) -> f64 {
    let xf = x.floor();
    let yf = y.floor();
    let (fx, fy) = (x - xf, y - yf);
    let (x0, y0) = (xf as usize, yf as usize);
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    let top = img.get(x0, y0) + fx * (img.get(x1, y0) - img.get(x0, y0));
    let bottom = img.get(x0, y1) + fx * (img.get(x1, y1) - img.get(x0, y1));
    top + fy * (bottom - top)
}

/// Maps each 8-bit pattern to its histogram bin: uniform patterns (at most
/// two circular 0/1 transitions) in ascending byte order to bins 0..57,
/// everything else to bin 58.
fn uniform_bin_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [UNIFORM_BINS as u8; 256];
        let mut next = 0u8;
        for p in 0..256usize {
            let transitions = (0..8)
                .filter(|&k| ((p >> k) & 1) != ((p >> ((k + 1) % 8)) & 1))
                .count();
            if transitions <= 2 {
                table[p] = next;
                next += 1;
            }
        }
        assert_eq!(next as usize, UNIFORM_BINS);
        table
    })
}
