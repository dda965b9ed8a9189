//! The evaluation metric: average per-category global intersection-over-
//! union, in percent.

use crate::error::{Error, Result};

use super::labelmap::{LabelMap, VOID};

/// Per-category accuracies and their mean. An entry is `None` when the
/// category appears in neither the predictions nor the ground truth across
/// the whole dataset; such categories are excluded from the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct AacReport {
    pub per_category: Vec<Option<f64>>,
    pub mean: f64,
    pub include_background: bool,
}

/// Computes the metric over `(image id, prediction, ground truth)` triples.
/// Counts are pooled dataset-globally per category; the per-category score
/// is `TP / (TP + FP + FN) * 100` over non-void pixels, and the mean runs
/// over the categories present anywhere (background included only when
/// `include_background` is set). Pixels void in the ground truth are
/// excluded no matter what the prediction says there.
pub fn aac(
    pairs: &[(&str, &LabelMap, &LabelMap)],
    n_categories: usize,
    include_background: bool,
) -> Result<AacReport> {
    if n_categories == 0 {
        return Err(Error::InvalidParameter("need at least one category".into()));
    }
    let mut tp = vec![0u64; n_categories];
    let mut fp = vec![0u64; n_categories];
    let mut fn_ = vec![0u64; n_categories];

    for (id, pred, gt) in pairs {
        if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
            return Err(Error::DimensionMismatch {
                expected: gt.width() * gt.height(),
                actual: pred.width() * pred.height(),
            }
            .with_context(format!("image `{id}`")));
        }
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            if g == VOID {
                continue;
            }
            let (p, g) = (p as usize, g as usize);
            if p == g {
                if g < n_categories {
                    tp[g] += 1;
                }
            } else {
                if g < n_categories {
                    fn_[g] += 1;
                }
                if p < n_categories {
                    fp[p] += 1;
                }
            }
        }
    }

    let per_category: Vec<Option<f64>> = (0..n_categories)
        .map(|c| {
            let denom = tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                None
            } else {
                Some(100.0 * tp[c] as f64 / denom as f64)
            }
        })
        .collect();

    let included: Vec<f64> = per_category
        .iter()
        .enumerate()
        .filter(|&(c, _)| include_background || c != 0)
        .filter_map(|(_, acc)| *acc)
        .collect();
    let mean = if included.is_empty() {
        0.0
    } else {
        included.iter().sum::<f64>() / included.len() as f64
    };

    Ok(AacReport { per_category, mean, include_background })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map_of(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> LabelMap {
        let mut m = LabelMap::background(width, height);
        for y in 0..height {
            for x in 0..width {
                m.set(x, y, f(x, y));
            }
        }
        m
    }

    #[test]
    fn perfect_prediction_scores_100() {
        let gt = map_of(8, 8, |x, _| if x < 4 { 1 } else { 0 });
        let pairs = vec![("i", &gt, &gt)];
        let r = aac(&pairs, 3, true).unwrap();
        assert_eq!(r.per_category[0], Some(100.0));
        assert_eq!(r.per_category[1], Some(100.0));
        assert_eq!(r.per_category[2], None);
        assert_eq!(r.mean, 100.0);
    }

    #[test]
    fn all_background_prediction_on_small_object() {
        // 20x20 image, a 10-pixel object of category 3, all-background
        // prediction: category 3 scores 0, background 390/400.
        let gt = map_of(20, 20, |x, y| if y == 0 && x < 10 { 3 } else { 0 });
        let pred = LabelMap::background(20, 20);
        let pairs = vec![("i", &pred, &gt)];
        let r = aac(&pairs, 5, true).unwrap();
        assert_eq!(r.per_category[3], Some(0.0));
        assert_eq!(r.per_category[0], Some(100.0 * 390.0 / 400.0));
        assert_eq!(r.per_category[1], None);
        assert_eq!(r.per_category[2], None);
        assert_eq!(r.per_category[4], None);
        assert_eq!(r.mean, (97.5 + 0.0) / 2.0);

        let r = aac(&pairs, 5, false).unwrap();
        assert_eq!(r.mean, 0.0); // only category 3 is in the mean
    }

    fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, n: u8, with_void: bool) -> LabelMap {
        let mut m = LabelMap::background(w, h);
        for y in 0..h {
            for x in 0..w {
                let l = if with_void && rng.gen::<f64>() < 0.1 {
                    VOID
                } else {
                    rng.gen_range(0..n)
                };
                m.set(x, y, l);
            }
        }
        m
    }

    /// Brute-force reference: one pass per category per pixel.
    fn aac_by_triple_loop(
        pairs: &[(&str, &LabelMap, &LabelMap)],
        n: usize,
        include_background: bool,
    ) -> (Vec<Option<f64>>, f64) {
        let mut per = Vec::new();
        for c in 0..n {
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for (_, pred, gt) in pairs {
                for y in 0..gt.height() {
                    for x in 0..gt.width() {
                        if gt.get(x, y) == VOID {
                            continue;
                        }
                        let p = pred.get(x, y) as usize == c;
                        let g = gt.get(x, y) as usize == c;
                        match (p, g) {
                            (true, true) => tp += 1,
                            (true, false) => fp += 1,
                            (false, true) => fn_ += 1,
                            (false, false) => {}
                        }
                    }
                }
            }
            let denom = tp + fp + fn_;
            per.push(if denom == 0 {
                None
            } else {
                Some(100.0 * tp as f64 / denom as f64)
            });
        }
        let vals: Vec<f64> = per
            .iter()
            .enumerate()
            .filter(|&(c, _)| include_background || c != 0)
            .filter_map(|(_, a)| *a)
            .collect();
        let mean = if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        (per, mean)
    }

    #[test]
    fn agrees_exactly_with_triple_loop_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..50 {
            let w = rng.gen_range(1..=32);
            let h = rng.gen_range(1..=32);
            let n = rng.gen_range(2..=6u8);
            let gt = random_map(&mut rng, w, h, n, true);
            let pred = random_map(&mut rng, w, h, n, false);
            let pairs = vec![("a", &pred, &gt)];
            for flag in [true, false] {
                let fast = aac(&pairs, n as usize, flag).unwrap();
                let (per, mean) = aac_by_triple_loop(&pairs, n as usize, flag);
                assert_eq!(fast.per_category, per, "trial {trial}");
                assert_eq!(fast.mean, mean, "trial {trial}");
            }
        }
    }

    #[test]
    fn void_pixels_in_ground_truth_mask_the_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = random_map(&mut rng, 16, 16, 4, true);
        let pred = random_map(&mut rng, 16, 16, 4, false);
        let mut scrambled = pred.clone();
        for y in 0..16 {
            for x in 0..16 {
                if gt.get(x, y) == VOID {
                    scrambled.set(x, y, rng.gen_range(0..4));
                }
            }
        }
        let base = aac(&[("i", &pred, &gt)], 4, true).unwrap();
        let after = aac(&[("i", &scrambled, &gt)], 4, true).unwrap();
        assert_eq!(base, after);
    }

    #[test]
    fn dimension_mismatch_names_the_image() {
        let gt = LabelMap::background(4, 4);
        let pred = LabelMap::background(8, 8);
        let err = aac(&[("img_0007", &pred, &gt)], 2, true).unwrap_err();
        assert!(err.to_string().contains("img_0007"), "{err}");
    }

    #[test]
    fn counts_pool_across_images() {
        // Two images; category 1 is perfectly predicted in one and fully
        // missed in the other. Pooled counts give 50/150, not mean of
        // per-image scores.
        let gt = map_of(10, 10, |x, _| if x < 5 { 1 } else { 0 });
        let hit = gt.clone();
        let miss = map_of(10, 10, |x, _| if x < 5 { 0 } else { 1 });
        let pairs = vec![("a", &hit, &gt), ("b", &miss, &gt)];
        let r = aac(&pairs, 2, true).unwrap();
        // tp=50, fn=50, fp=50 for category 1.
        assert_eq!(r.per_category[1], Some(100.0 * 50.0 / 150.0));
    }
}
