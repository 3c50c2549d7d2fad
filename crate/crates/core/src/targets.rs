//! Dense training targets for the initial and refinement heads, plus the
//! decoders that turn head outputs back into quadrilaterals.
//!
//! Offsets are always stored as eight values `(x1, y1, ..., x4, y4)`, the
//! corner minus the bin center, divided by the level stride.

use crate::cell::Cell;
use crate::error::{Error, Result};
use crate::postprocess::Detection;
use crate::quadgeom::{aabb, area, canonicalize, contains_point, iou_aabb, scale_measure, shrink, GroundTruth, Point, Quad};
use crate::scalar::Scalar;

/// One pyramid level: stride `2^level` and the scale range `(lo, hi]` of
/// texts it is responsible for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSpec {
    pub level: u8,
    pub stride: u32,
    pub lo: f64,
    pub hi: f64,
}

impl LevelSpec {
    pub fn new(level: u8, lo: f64, hi: f64) -> Result<Self> {
        if !(1..=16).contains(&level) {
            return Err(Error::InvalidConfig(format!("pyramid level {level} out of range")));
        }
        if lo.is_nan() || hi.is_nan() || lo < 0.0 || hi <= lo {
            return Err(Error::InvalidConfig(format!("level {level}: scale range ({lo}, {hi}] is empty")));
        }
        Ok(Self { level, stride: 1 << level, lo, hi })
    }

    /// P2..P6 with ranges (0,32], (16,64], (32,128], (64,256], (128,inf).
    pub fn pyramid() -> Vec<LevelSpec> {
        [(2, 0.0, 32.0), (3, 16.0, 64.0), (4, 32.0, 128.0), (5, 64.0, 256.0), (6, 128.0, f64::INFINITY)]
            .into_iter()
            .map(|(l, lo, hi)| LevelSpec::new(l, lo, hi).expect("default pyramid is valid"))
            .collect()
    }

    pub fn accepts(&self, scale: f64) -> bool {
        self.lo < scale && scale <= self.hi
    }

    /// Feature-map size for an image of `width x height` pixels.
    pub fn map_size(&self, width: usize, height: usize) -> (usize, usize) {
        let s = self.stride as usize;
        (height.div_ceil(s), width.div_ceil(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
    Ignore,
}

impl Label {
    /// `1`, `0`, `-1` as stored in serialized maps.
    pub fn code(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => 0,
            Label::Ignore => -1,
        }
    }
}

/// Dense labels and offset targets for one level. `reg` holds eight values
/// per bin and is zero wherever the label is not positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTargets<T> {
    pub level: LevelSpec,
    pub height: usize,
    pub width: usize,
    pub labels: Vec<Label>,
    pub reg: Vec<T>,
    pub matched: Vec<Option<usize>>,
}

impl<T: Scalar> LevelTargets<T> {
    fn empty(level: LevelSpec, height: usize, width: usize) -> Self {
        let n = height * width;
        Self { level, height, width, labels: vec![Label::Negative; n], reg: vec![T::zero(); n * 8], matched: vec![None; n] }
    }

    pub fn offsets(&self, cell: Cell) -> [T; 8] {
        let base = cell.index(self.width) * 8;
        std::array::from_fn(|k| self.reg[base + k])
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    pub fn positives(&self) -> impl Iterator<Item = Cell> + '_ {
        let w = self.width;
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Label::Positive)
            .map(move |(i, _)| Cell::from_index(i, w))
    }
}

/// Initial-stage targets for every level.
pub type TargetMaps<T> = Vec<LevelTargets<T>>;

/// Refinement-stage targets share the layout; `reg` holds residuals on
/// top of the initial offsets.
pub type RefineTargets<T> = LevelTargets<T>;

/// `(floor(s/2) + x s, floor(s/2) + y s)`.
pub fn bin_center<T: Scalar>(cell: Cell, stride: u32) -> Point<T> {
    let s = stride as usize;
    let half = s / 2;
    Point::new(T::from_usize_lossy(half + cell.x * s), T::from_usize_lossy(half + cell.y * s))
}

/// Ground truths routed to one level; `source` maps back to the input list.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelGts<T> {
    pub level: LevelSpec,
    pub gts: Vec<GroundTruth<T>>,
    pub source: Vec<usize>,
}

/// Routes every text to each level whose range contains its scale measure.
pub fn assign_levels<T: Scalar>(gts: &[GroundTruth<T>], levels: &[LevelSpec]) -> Vec<LevelGts<T>> {
    let scales: Vec<f64> = gts.iter().map(|g| scale_measure(&g.quad).to_f64().unwrap_or(f64::NAN)).collect();
    levels
        .iter()
        .map(|level| {
            let source: Vec<usize> = (0..gts.len()).filter(|&i| level.accepts(scales[i])).collect();
            LevelGts { level: *level, gts: source.iter().map(|&i| gts[i]).collect(), source }
        })
        .collect()
}

/// Stride-normalised offsets from the bin center to each corner.
pub fn encode_offsets<T: Scalar>(cell: Cell, quad: &Quad<T>, stride: u32) -> [T; 8] {
    let c = bin_center::<T>(cell, stride);
    let s = T::from_u32(stride).unwrap();
    let q = quad.coords();
    std::array::from_fn(|k| (q[k] - if k % 2 == 0 { c.x } else { c.y }) / s)
}

/// Labels a `height x width` map from the texts assigned to `level`.
///
/// A bin is positive when its center falls inside the shrunk region of a
/// non-ignored text (the smallest such text wins), ignored when it falls
/// inside a do-not-care region or inside a text but outside every shrunk
/// region, and negative otherwise. `matched` indexes into `gts`.
pub fn build_initial_targets<T: Scalar>(
    gts: &[GroundTruth<T>],
    level: &LevelSpec,
    height: usize,
    width: usize,
    shrink_ratio: T,
) -> Result<LevelTargets<T>> {
    let mut out = LevelTargets::empty(*level, height, width);
    let n = height * width;
    let mut best: Vec<Option<(T, usize)>> = vec![None; n];
    let mut covered = vec![false; n];

    for (gi, gt) in gts.iter().enumerate() {
        let shrunk = if gt.ignore { None } else { Some(shrink(&gt.quad, shrink_ratio)?) };
        let gt_area = area(&gt.quad);
        for cell in cells_in_box(&gt.quad, level.stride, height, width) {
            let c = bin_center::<T>(cell, level.stride);
            if !contains_point(&gt.quad, c) {
                continue;
            }
            let idx = cell.index(width);
            covered[idx] = true;
            if let Some(s) = &shrunk {
                if contains_point(s, c) && best[idx].is_none_or(|(a, _)| gt_area < a) {
                    best[idx] = Some((gt_area, gi));
                }
            }
        }
    }

    for idx in 0..n {
        if let Some((_, gi)) = best[idx] {
            out.labels[idx] = Label::Positive;
            out.matched[idx] = Some(gi);
            let offs = encode_offsets(Cell::from_index(idx, width), &gts[gi].quad, level.stride);
            out.reg[idx * 8..idx * 8 + 8].copy_from_slice(&offs);
        } else if covered[idx] {
            out.labels[idx] = Label::Ignore;
        }
    }
    Ok(out)
}

/// Cells whose bin centers may fall inside the quad's bounding box.
fn cells_in_box<T: Scalar>(quad: &Quad<T>, stride: u32, height: usize, width: usize) -> impl Iterator<Item = Cell> {
    let b = aabb(quad);
    let s = stride as f64;
    let half = (stride / 2) as f64;
    let lo = |v: T| ((v.to_f64().unwrap() - half) / s).ceil().max(0.0) as usize;
    let hi = |v: T, n: usize| {
        let t = ((v.to_f64().unwrap() - half) / s).floor();
        if t < 0.0 {
            None
        } else {
            Some((t as usize).min(n.saturating_sub(1)))
        }
    };
    let xs = hi(b.max_x, width).map(|h| lo(b.min_x)..=h);
    let ys = hi(b.max_y, height).map(|h| lo(b.min_y)..=h);
    let ranges = match (xs, ys) {
        (Some(x), Some(y)) if width > 0 && height > 0 => Some((x, y)),
        _ => None,
    };
    ranges.into_iter().flat_map(|(xs, ys)| ys.flat_map(move |y| xs.clone().map(move |x| Cell::new(x, y))))
}

/// Builds targets for every level of `levels` with `matched` pointing into
/// the full `gts` list.
pub fn build_pyramid_targets<T: Scalar>(
    gts: &[GroundTruth<T>],
    levels: &[LevelSpec],
    image_width: usize,
    image_height: usize,
    shrink_ratio: T,
) -> Result<TargetMaps<T>> {
    assign_levels(gts, levels)
        .into_iter()
        .map(|lg| {
            let (h, w) = lg.level.map_size(image_width, image_height);
            let mut t = build_initial_targets(&lg.gts, &lg.level, h, w, shrink_ratio)?;
            for m in t.matched.iter_mut().flatten() {
                *m = lg.source[*m];
            }
            Ok(t)
        })
        .collect()
}

/// `corner_k = bin_center + (o[2k], o[2k+1]) * s`, canonicalized.
pub fn decode_initial<T: Scalar>(cell: Cell, offsets: &[T; 8], stride: u32) -> Result<Quad<T>> {
    let c = bin_center::<T>(cell, stride);
    let s = T::from_u32(stride).unwrap();
    canonicalize(std::array::from_fn(|k| Point::new(c.x + offsets[2 * k] * s, c.y + offsets[2 * k + 1] * s)))
}

/// `corner = bin_center + (o_i + o_r) * s`, carrying the refined score.
pub fn decode_refined<T: Scalar>(
    cell: Cell,
    initial: &[T; 8],
    residual: &[T; 8],
    stride: u32,
    score: T,
) -> Result<Detection<T>> {
    let sum: [T; 8] = std::array::from_fn(|k| initial[k] + residual[k]);
    Detection::new(decode_initial(cell, &sum, stride)?, score)
}

/// Refinement labels from decoded initial predictions.
///
/// `initial` holds eight offsets per bin. A bin whose decoded prediction has
/// bounding-box IoU above `iou_thresh` with some text takes the best such
/// text: positive with residual `target - o_i` if it is a normal text,
/// ignore if it is a do-not-care region. Everything else, including bins
/// whose prediction does not decode to a convex quad, is negative.
pub fn build_refine_targets<T: Scalar>(
    initial: &[T],
    height: usize,
    width: usize,
    level: &LevelSpec,
    gts: &[GroundTruth<T>],
    iou_thresh: T,
) -> Result<RefineTargets<T>> {
    if initial.len() != height * width * 8 {
        return Err(Error::ShapeMismatch(format!(
            "expected {} initial offsets for {height}x{width}, got {}",
            height * width * 8,
            initial.len()
        )));
    }
    let gt_boxes: Vec<_> = gts.iter().map(|g| aabb(&g.quad)).collect();
    let mut out = LevelTargets::empty(*level, height, width);
    for idx in 0..height * width {
        let cell = Cell::from_index(idx, width);
        let o_i: [T; 8] = std::array::from_fn(|k| initial[idx * 8 + k]);
        let Ok(pred) = decode_initial(cell, &o_i, level.stride) else { continue };
        let pb = aabb(&pred);
        let mut best: Option<(T, usize)> = None;
        for (gi, gb) in gt_boxes.iter().enumerate() {
            let iou = iou_aabb(&pb, gb);
            if best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, gi));
            }
        }
        let Some((iou, gi)) = best else { continue };
        if iou <= iou_thresh {
            continue;
        }
        if gts[gi].ignore {
            out.labels[idx] = Label::Ignore;
            continue;
        }
        out.labels[idx] = Label::Positive;
        out.matched[idx] = Some(gi);
        let target = encode_offsets(cell, &gts[gi].quad, level.stride);
        for k in 0..8 {
            out.reg[idx * 8 + k] = target[k] - o_i[k];
        }
    }
    Ok(out)
}

/// Per-level head outputs: initial score (1 channel), initial offsets (8),
/// refined score (1) and refined residuals (8), all `height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs<T> {
    pub stride: u32,
    pub height: usize,
    pub width: usize,
    pub initial_score: Vec<T>,
    pub initial_offsets: Vec<T>,
    pub refined_score: Vec<T>,
    pub refined_offsets: Vec<T>,
}

impl<T: Scalar> HeadOutputs<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.height * self.width;
        let shapes = [
            ("initial_score", self.initial_score.len(), n),
            ("initial_offsets", self.initial_offsets.len(), n * 8),
            ("refined_score", self.refined_score.len(), n),
            ("refined_offsets", self.refined_offsets.len(), n * 8),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::ShapeMismatch(format!("{name}: expected {want} values, got {got}")));
            }
        }
        Ok(())
    }

    /// What a perfectly trained network would emit: scores are the target
    /// labels and offsets are the regression targets.
    pub fn ideal(initial: &LevelTargets<T>, refine: &RefineTargets<T>) -> Result<Self> {
        if (initial.height, initial.width) != (refine.height, refine.width) {
            return Err(Error::ShapeMismatch("initial and refine targets differ in size".into()));
        }
        let score = |l: &Label| if *l == Label::Positive { T::one() } else { T::zero() };
        Ok(Self {
            stride: initial.level.stride,
            height: initial.height,
            width: initial.width,
            initial_score: initial.labels.iter().map(score).collect(),
            initial_offsets: initial.reg.clone(),
            refined_score: refine.labels.iter().map(score).collect(),
            refined_offsets: refine.reg.clone(),
        })
    }

    /// Decodes every bin whose refined score reaches `min_score`; bins that
    /// do not decode to a convex quad are dropped.
    pub fn decode(&self, min_score: T) -> Result<Vec<Detection<T>>> {
        self.validate()?;
        let mut dets = Vec::new();
        for idx in 0..self.height * self.width {
            let score = self.refined_score[idx];
            if score < min_score {
                continue;
            }
            let o_i: [T; 8] = std::array::from_fn(|k| self.initial_offsets[idx * 8 + k]);
            let o_r: [T; 8] = std::array::from_fn(|k| self.refined_offsets[idx * 8 + k]);
            if let Ok(d) = decode_refined(Cell::from_index(idx, self.width), &o_i, &o_r, self.stride, score) {
                dets.push(d);
            }
        }
        Ok(dets)
    }
}
