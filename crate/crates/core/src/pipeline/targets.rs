//! Per-candidate regression targets: category-wise overlap with the ground
//! truth.

use crate::raster::BinaryMask;

use super::labelmap::{LabelMap, VOID};

/// Per-category intersection-over-union between a candidate mask and the
/// ground-truth support of each category. Void pixels are ignored on both
/// sides of the ratio: they contribute to neither the intersection nor the
/// union. A category whose union is empty gets 0.
///
/// Panics if the mask and ground-truth dimensions disagree — callers
/// validate dimensions when the data is loaded.
pub fn candidate_targets(mask: &BinaryMask, gt: &LabelMap, n_categories: usize) -> Vec<f64> {
    assert_eq!(
        (mask.width(), mask.height()),
        (gt.width(), gt.height()),
        "candidate mask and ground truth dimensions must match"
    );
    let mut inter = vec![0u64; n_categories];
    let mut gt_count = vec![0u64; n_categories];
    let mut mask_count = 0u64;

    for (&m, &label) in mask.bits().iter().zip(gt.labels()) {
        if label == VOID {
            continue;
        }
        let l = label as usize;
        if l < n_categories {
            gt_count[l] += 1;
        }
        if m {
            mask_count += 1;
            if l < n_categories {
                inter[l] += 1;
            }
        }
    }

    (0..n_categories)
        .map(|c| {
            let union = mask_count + gt_count[c] - inter[c];
            if union == 0 {
                0.0
            } else {
                inter[c] as f64 / union as f64
            }
        })
        .collect()
}
