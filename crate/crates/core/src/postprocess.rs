//! Score filtering and greedy polygonal non-maximum suppression.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::quadgeom::{aabb, area, iou_with_areas, Aabb, Quad};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection<T> {
    pub quad: Quad<T>,
    pub score: T,
}

impl<T: Scalar> Detection<T> {
    pub fn new(quad: Quad<T>, score: T) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { quad, score })
    }
}

/// Keeps detections with `score >= min_score`, preserving order.
pub fn score_filter<T: Scalar>(dets: &[Detection<T>], min_score: T) -> Vec<Detection<T>> {
    dets.iter().filter(|d| d.score >= min_score).copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnmsOptions<T> {
    /// Detections overlapping a kept one with IoU at or above this are dropped.
    pub iou_thresh: T,
    /// Skip polygon clipping for pairs whose bounding boxes are disjoint.
    pub aabb_prefilter: bool,
}

impl<T: Scalar> PnmsOptions<T> {
    pub fn new(iou_thresh: T) -> Self {
        Self { iou_thresh, aabb_prefilter: true }
    }
}

impl<T: Scalar> Default for PnmsOptions<T> {
    fn default() -> Self {
        Self::new(T::lit(0.3))
    }
}

/// Indices sorted by score descending; equal scores keep input order.
fn score_order<T: Scalar>(dets: &[Detection<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap_or(Ordering::Equal));
    order
}

/// Greedy PNMS with the bounding-box prefilter enabled.
pub fn pnms<T: Scalar>(dets: &[Detection<T>], iou_thresh: T) -> Vec<Detection<T>> {
    pnms_with(dets, &PnmsOptions::new(iou_thresh))
}

/// Greedy PNMS: repeatedly keep the best remaining detection and drop
/// everything whose polygon IoU with it reaches the threshold. Output is
/// sorted by score descending.
///
/// The prefilter only skips pairs whose bounding boxes do not touch, whose
/// IoU is zero, so both settings keep the same set for any positive
/// threshold.
pub fn pnms_with<T: Scalar>(dets: &[Detection<T>], opts: &PnmsOptions<T>) -> Vec<Detection<T>> {
    let order = score_order(dets);
    let n = order.len();
    let quads: Vec<&Quad<T>> = order.iter().map(|&i| &dets[i].quad).collect();
    let areas: Vec<T> = quads.iter().map(|q| area(q)).collect();
    let boxes: Vec<Aabb<T>> = quads.iter().map(|q| aabb(q)).collect();

    let mut suppressed = vec![false; n];
    let mut keep = Vec::new();
    for i in 0..n {
        if suppressed[i] {
            continue;
        }
        keep.push(dets[order[i]]);
        for j in i + 1..n {
            if suppressed[j] {
                continue;
            }
            if opts.aabb_prefilter && !boxes[i].overlaps(&boxes[j]) {
                continue;
            }
            if iou_with_areas(quads[i], areas[i], quads[j], areas[j]) >= opts.iou_thresh {
                suppressed[j] = true;
            }
        }
    }
    keep
}

/// All-pairs PNMS without any prefilter, recomputing every IoU from
/// scratch. Reference for [`pnms`].
pub fn pnms_naive<T: Scalar>(dets: &[Detection<T>], iou_thresh: T) -> Vec<Detection<T>> {
    let order = score_order(dets);
    let mut suppressed = vec![false; order.len()];
    let mut keep = Vec::new();
    for (a, &i) in order.iter().enumerate() {
        if suppressed[a] {
            continue;
        }
        keep.push(dets[i]);
        for (b, &j) in order.iter().enumerate().skip(a + 1) {
            if !suppressed[b] && crate::quadgeom::iou_quad(&dets[i].quad, &dets[j].quad) >= iou_thresh {
                suppressed[b] = true;
            }
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadgeom::iou_quad;
    use proptest::prelude::*;

    fn det(x: f64, y: f64, side: f64, score: f64) -> Detection<f64> {
        Detection::new(Quad::rect(x, y, x + side, y + side).unwrap(), score).unwrap()
    }

    #[test]
    fn score_filter_examples() {
        let dets = vec![det(0., 0., 1., 0.9), det(5., 5., 1., 0.4)];
        assert_eq!(score_filter(&dets, 0.0), dets);
        assert!(score_filter(&dets, 1.01).is_empty());
        assert_eq!(score_filter(&dets, 0.5), vec![dets[0]]);
    }

    #[test]
    fn pnms_examples() {
        let dup = vec![det(0., 0., 1., 0.8), det(0., 0., 1., 0.9)];
        assert_eq!(pnms(&dup, 0.5), vec![dup[1]]);

        let apart = vec![det(0., 0., 1., 0.2), det(3., 0., 1., 0.9), det(0., 3., 1., 0.5)];
        assert_eq!(pnms(&apart, 0.3), vec![apart[1], apart[2], apart[0]]);

        let offset = vec![det(0., 0., 1., 0.9), det(0.5, 0., 1., 0.8)];
        assert_eq!(pnms(&offset, 0.3), vec![offset[0]]);
        assert_eq!(pnms(&offset, 0.4), offset);
        assert_eq!(pnms_naive(&offset, 0.3), vec![offset[0]]);
    }

    #[test]
    fn equal_scores_keep_input_order() {
        let tied = vec![det(0., 0., 1., 0.5), det(0.1, 0., 1., 0.5)];
        assert_eq!(pnms(&tied, 0.3), vec![tied[0]]);
        let swapped = vec![tied[1], tied[0]];
        assert_eq!(pnms(&swapped, 0.3), vec![tied[1]]);
    }

    #[test]
    fn touching_boxes_still_reach_the_clipper() {
        // Shared edge: bounding boxes touch, IoU is zero, both survive.
        let dets = vec![det(0., 0., 1., 0.9), det(1., 0., 1., 0.8)];
        assert_eq!(pnms(&dets, 0.01), dets);
    }

    fn cluster_dets() -> impl Strategy<Value = Vec<Detection<f64>>> {
        prop::collection::vec((0.0..40.0f64, 0.0..40.0f64, 2.0..15.0f64, 0.0..1.0f64), 0..40)
            .prop_map(|v| v.into_iter().map(|(x, y, s, sc)| det(x, y, s, sc)).collect())
    }

    proptest! {
        #[test]
        fn pnms_invariants(dets in cluster_dets(), thresh in 0.05..0.95f64) {
            let kept = pnms(&dets, thresh);
            prop_assert_eq!(&kept, &pnms_naive(&dets, thresh));
            for k in &kept {
                prop_assert!(dets.contains(k));
            }
            for (a, x) in kept.iter().enumerate() {
                for y in &kept[a + 1..] {
                    prop_assert!(iou_quad(&x.quad, &y.quad) < thresh);
                    prop_assert!(x.score >= y.score);
                }
            }
            prop_assert_eq!(pnms(&kept, thresh), kept);
        }

        #[test]
        fn pnms_ignores_input_order(dets in cluster_dets(), thresh in 0.05..0.95f64, seed: u64) {
            let mut distinct = dets.clone();
            for (i, d) in distinct.iter_mut().enumerate() {
                d.score = (i as f64 + 1.0) / (dets.len() as f64 + 1.0);
            }
            let mut shuffled = distinct.clone();
            let n = shuffled.len();
            if n > 1 {
                for i in 0..n {
                    let j = ((seed.wrapping_mul(i as u64 + 7)) % n as u64) as usize;
                    shuffled.swap(i, j);
                }
            }
            prop_assert_eq!(pnms(&distinct, thresh), pnms(&shuffled, thresh));
        }
    }
}
