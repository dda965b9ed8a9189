//! Dense SIFT-style gradient histograms with the standard 4x4-cell, 8-bin
//! layout, plus the masked variant that gates per-pixel gradient magnitude
//! by a figure mask.

use rayon::prelude::*;

use super::{DenseGrid, Frame, LocalDescriptor};
use crate::raster::{BinaryMask, GrayImage};

const CELLS: usize = 4;
const ORI_BINS: usize = 8;
const GRAD_DIM: usize = CELLS * CELLS * ORI_BINS;
const CLIP: f64 = 0.2;

/// Dense (masked) SIFT extraction over the grid.
///
/// Per patch: patch-local finite-difference gradients (central differences
/// inside, one-sided at patch edges); when `mask` is given, the gradient
/// magnitude of pixels outside the mask is zeroed before binning, so a
/// fully-covering mask reproduces the unmasked descriptor bit for bit.
/// Histograms use bilinear spatial and linear orientation interpolation
/// with Gaussian weighting (sigma = patch/2), then L2-normalize, clip at
/// 0.2, renormalize. Enrichment appends frame-relative x, y, scale and the
/// (mask-restricted) mean patch intensity.
pub fn dense_sift(
    img: &GrayImage,
    grid: &DenseGrid,
    mask: Option<&BinaryMask>,
    frame: Frame,
) -> Vec<LocalDescriptor> {
    if let Some(m) = mask {
        debug_assert_eq!((m.width(), m.height()), (img.width(), img.height()));
    }
    grid.centers(img.width(), img.height())
        .into_par_iter()
        .map(|(cx, cy, s)| {
            let hist = sift_histogram(img, mask, cx, cy, s);
            let mut vector = normalize_histogram(&hist);
            let (rx, ry, rs) = frame.enrich(cx, cy, s);
            vector.push(rx);
            vector.push(ry);
            vector.push(rs);
            vector.push(patch_mean(img, mask, cx, cy, s));
            LocalDescriptor { x: cx, y: cy, scale: s, vector }
        })
        .collect()
}

/// Raw (pre-normalization) 128-bin gradient histogram of one patch.
/// Contributions are accumulated per pixel in scan order, and masking gates
/// each pixel independently, so histograms are additive over disjoint
/// masks.
pub(crate) fn sift_histogram(
    img: &GrayImage,
    mask: Option<&BinaryMask>,
    cx: usize,
    cy: usize,
    s: usize,
) -> [f64; GRAD_DIM] {
    let x0 = cx - s / 2;
    let y0 = cy - s / 2;
    let at = |px: usize, py: usize| img.get(x0 + px, y0 + py);
    let inside = |px: usize, py: usize| {
        mask.is_none_or(|m| m.get(x0 + px, y0 + py))
    };

    let cell = s as f64 / CELLS as f64;
    let sigma = s as f64 / 2.0;
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let half = s as f64 / 2.0;

    let mut hist = [0.0; GRAD_DIM];
    for py in 0..s {
        for px in 0..s {
            if !inside(px, py) {
                continue;
            }
            let gx = if px == 0 {
                at(1, py) - at(0, py)
            } else if px == s - 1 {
                at(s - 1, py) - at(s - 2, py)
            } else {
                (at(px + 1, py) - at(px - 1, py)) / 2.0
            };
            let gy = if py == 0 {
                at(px, 1) - at(px, 0)
            } else if py == s - 1 {
                at(px, s - 1) - at(px, s - 2)
            } else {
                (at(px, py + 1) - at(px, py - 1)) / 2.0
            };
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }

            let u = px as f64 + 0.5;
            let v = py as f64 + 0.5;
            let (du, dv) = (u - half, v - half);
            let weight = mag * (-(du * du + dv * dv) * inv_two_sigma_sq).exp();

            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += 2.0 * std::f64::consts::PI;
            }
            let of = theta / (2.0 * std::f64::consts::PI / ORI_BINS as f64);
            let o0 = (of.floor() as usize) % ORI_BINS;
            let fo = of - of.floor();

            let cxf = u / cell - 0.5;
            let cyf = v / cell - 0.5;
            for (ci, wi) in cell_taps(cxf) {
                for (cj, wj) in cell_taps(cyf) {
                    let base = (cj * CELLS + ci) * ORI_BINS;
                    let w = weight * wi * wj;
                    hist[base + o0] += w * (1.0 - fo);
                    hist[base + (o0 + 1) % ORI_BINS] += w * fo;
                }
            }
        }
    }
    hist
}

/// Bilinear spatial taps for a continuous cell coordinate in [-0.5, 3.5]:
/// up to two adjacent cells with hat weights.
fn cell_taps(c: f64) -> impl Iterator<Item = (usize, f64)> {
    let i0 = c.floor();
    let f = c - i0;
    let i0 = i0 as isize;
    [(i0, 1.0 - f), (i0 + 1, f)]
        .into_iter()
        .filter(|&(i, w)| (0..CELLS as isize).contains(&i) && w > 0.0)
        .map(|(i, w)| (i as usize, w))
}

/// L2-normalize, clip at 0.2, renormalize; the all-zero histogram stays
/// all-zero.
fn normalize_histogram(hist: &[f64; GRAD_DIM]) -> Vec<f64> {
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return hist.to_vec();
    }
    let clipped: Vec<f64> = hist.iter().map(|v| (v / norm).min(CLIP)).collect();
    let norm2 = clipped.iter().map(|v| v * v).sum::<f64>().sqrt();
    clipped.iter().map(|v| v / norm2).collect()
}

/// Mean intensity over the patch, restricted to mask pixels when a mask is
/// given; 0 when the mask misses the patch entirely.
fn patch_mean(
    img: &GrayImage,
    mask: Option<&BinaryMask>,
    cx: usize,
    cy: usize,
    s: usize,
) -> f64 {
    let x0 = cx - s / 2;
    let y0 = cy - s / 2;
    let mut sum = 0.0;
    let mut count = 0usize;
    for py in 0..s {
        for px in 0..s {
            if mask.is_none_or(|m| m.get(x0 + px, y0 + py)) {
                sum += img.get(x0 + px, y0 + py);
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
