//! Greedy pasting of scored candidates into a pixel labeling.

use crate::error::{Error, Result};

use super::labelmap::LabelMap;
use super::manifest::CandidateRecord;

/// Greedy inference. Every (candidate, foreground category) pair whose
/// score clears `tau` is visited in descending score order, ties broken by
/// candidate rank (ascending) then category index (ascending). A pair is
/// accepted when at least half of the candidate's pixels are still
/// unlabeled, and painting touches exactly those unlabeled pixels, so every
/// painted pixel traces to a single accepted pair. Whatever remains is
/// background; the output never contains void.
///
/// Background (category 0) is never painted explicitly — it is the default
/// for unclaimed pixels — so only foreground categories enter the queue.
pub fn infer_labeling(
    candidates: &[CandidateRecord],
    n_categories: usize,
    tau: f64,
    width: usize,
    height: usize,
) -> Result<LabelMap> {
    if n_categories == 0 || n_categories > 255 {
        return Err(Error::InvalidParameter(format!(
            "inference needs between 1 and 255 categories, got {n_categories}"
        )));
    }
    if !tau.is_finite() {
        return Err(Error::InvalidParameter("threshold must be finite".into()));
    }

    // (score, rank, category, candidate index)
    let mut queue: Vec<(f64, usize, usize, usize)> = Vec::new();
    for (ci, cand) in candidates.iter().enumerate() {
        if (cand.mask.width(), cand.mask.height()) != (width, height) {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: cand.mask.width() * cand.mask.height(),
            }
            .with_context(format!("candidate `{}`", cand.id)));
        }
        let scores = cand.scores.as_ref().ok_or_else(|| {
            Error::InvalidParameter(format!("candidate `{}` has no scores", cand.id))
        })?;
        if scores.len() != n_categories {
            return Err(Error::DimensionMismatch {
                expected: n_categories,
                actual: scores.len(),
            }
            .with_context(format!("candidate `{}`", cand.id)));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NumericalInput);
        }
        for (c, &s) in scores.iter().enumerate().skip(1) {
            if s >= tau {
                queue.push((s, cand.rank, c, ci));
            }
        }
    }

    queue.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("scores checked finite")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut labels = vec![0u8; width * height];
    let mut painted = vec![false; width * height];
    for (_, _, category, ci) in queue {
        let mask = &candidates[ci].mask;
        let total = mask.count();
        if total == 0 {
            continue;
        }
        let unlabeled: usize = mask
            .iter_set()
            .filter(|&(x, y)| !painted[y * width + x])
            .count();
        if unlabeled * 2 < total {
            continue;
        }
        for (x, y) in mask.iter_set() {
            let idx = y * width + x;
            if !painted[idx] {
                painted[idx] = true;
                labels[idx] = category as u8;
            }
        }
    }

    LabelMap::new(width, height, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::testutil::mask_from_rows;
    use crate::raster::BinaryMask;

    fn scored(id: &str, mask: BinaryMask, rank: usize, scores: Vec<f64>) -> CandidateRecord {
        let mut c = CandidateRecord::new(id, mask, rank).unwrap();
        c.scores = Some(scores);
        c
    }

    #[test]
    fn nothing_above_threshold_gives_background() {
        let m = mask_from_rows(&["1100", "1100", "0000", "0000"]);
        let cands = vec![scored("c", m, 0, vec![0.9, 0.2, 0.1])];
        let out = infer_labeling(&cands, 3, 0.3, 4, 4).unwrap();
        assert!(out.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn single_candidate_paints_exactly_its_mask() {
        let m = mask_from_rows(&["1100", "1100", "0000", "0000"]);
        let cands = vec![scored("c", m.clone(), 0, vec![0.0, 0.8, 0.1])];
        let out = infer_labeling(&cands, 3, 0.3, 4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(out.get(x, y), if m.get(x, y) { 1 } else { 0 });
            }
        }
    }

    #[test]
    fn greedy_trace_on_two_overlapping_candidates() {
        // X covers columns 0..4, Y columns 2..8 of an 8x8 image. X scores
        // higher and paints first; Y overlaps X on columns 2..4 (16 of its
        // 48 pixels), leaving 2/3 unlabeled, so Y paints its remainder.
        let x = BinaryMask::from_fn(8, 8, |px, _| px < 4).unwrap();
        let y = BinaryMask::from_fn(8, 8, |px, _| px >= 2).unwrap();
        let cands = vec![
            scored("x", x, 0, vec![0.0, 0.9, 0.0]),
            scored("y", y, 1, vec![0.0, 0.0, 0.8]),
        ];
        let out = infer_labeling(&cands, 3, 0.3, 8, 8).unwrap();
        for py in 0..8 {
            for px in 0..8 {
                let want = if px < 4 { 1 } else { 2 };
                assert_eq!(out.get(px, py), want, "at ({px},{py})");
            }
        }

        // Shrink Y to columns 1..6: 24 of its 40 pixels already belong to
        // X, so only 40% is unlabeled and Y is rejected outright.
        let x = BinaryMask::from_fn(8, 8, |px, _| px < 4).unwrap();
        let y = BinaryMask::from_fn(8, 8, |px, _| (1..6).contains(&px)).unwrap();
        let cands = vec![
            scored("x", x, 0, vec![0.0, 0.9, 0.0]),
            scored("y", y, 1, vec![0.0, 0.0, 0.8]),
        ];
        let out = infer_labeling(&cands, 3, 0.3, 8, 8).unwrap();
        for py in 0..8 {
            for px in 0..8 {
                let want = if px < 4 { 1 } else { 0 };
                assert_eq!(out.get(px, py), want, "at ({px},{py})");
            }
        }
    }

    #[test]
    fn exactly_half_unlabeled_is_accepted() {
        // X paints rows 0..2; Y spans rows 0..4 in the same columns, so
        // exactly half of Y is unlabeled when its turn comes.
        let x = BinaryMask::from_fn(4, 4, |_, py| py < 2).unwrap();
        let y = BinaryMask::full(4, 4).unwrap();
        let cands = vec![
            scored("x", x, 0, vec![0.0, 0.9]),
            scored("y", y, 1, vec![0.0, 0.8]),
        ];
        let out = infer_labeling(&cands, 2, 0.3, 4, 4).unwrap();
        assert!(out.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn ties_break_by_rank_then_category() {
        // Same score on two fully-overlapping candidates: rank 0 wins.
        let m = mask_from_rows(&["11", "11"]);
        let cands = vec![
            scored("worse", m.clone(), 1, vec![0.0, 0.0, 0.7]),
            scored("better", m.clone(), 0, vec![0.0, 0.7, 0.0]),
        ];
        let out = infer_labeling(&cands, 3, 0.3, 2, 2).unwrap();
        assert!(out.labels().iter().all(|&l| l == 1));

        // Same candidate, two categories at the same score: the lower
        // category index paints; the second pair finds nothing unlabeled.
        let cands = vec![scored("c", m, 0, vec![0.0, 0.7, 0.7])];
        let out = infer_labeling(&cands, 3, 0.3, 2, 2).unwrap();
        assert!(out.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn missing_scores_is_an_error() {
        let m = mask_from_rows(&["1"]);
        let cands = vec![CandidateRecord::new("c", m, 0).unwrap()];
        let err = infer_labeling(&cands, 2, 0.3, 1, 1).unwrap_err();
        assert!(err.to_string().contains("no scores"), "{err}");
    }
}
