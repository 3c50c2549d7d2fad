//! Flat-buffer entry points for foreign callers. Quads travel as `N x 8`
//! row-major `x1,y1,...,x4,y4`; every function delegates to the typed API.

use crate::blob::encode_targets;
use crate::error::{Error, Result};
use crate::postprocess::{pnms, Detection};
use crate::qrc::{project_quad, sample_grid};
use crate::quadgeom::{iou_quad, GroundTruth, Quad};
use crate::scalar::Scalar;
use crate::targets::{build_pyramid_targets, LevelSpec};

pub fn quads_from_flat<T: Scalar>(flat: &[T]) -> Result<Vec<Quad<T>>> {
    if !flat.len().is_multiple_of(8) {
        return Err(Error::ShapeMismatch(format!("quad buffer length {} is not a multiple of 8", flat.len())));
    }
    flat.chunks_exact(8).map(|c| Quad::from_coords(c.try_into().unwrap())).collect()
}

/// `N x 8` quads to `N x (h w) x 2` grid points `(x, y)` in feature-map units.
pub fn sample_grids<T: Scalar>(quads: &[T], stride: u32, h: usize, w: usize) -> Result<Vec<T>> {
    let quads = quads_from_flat(quads)?;
    let mut out = Vec::with_capacity(quads.len() * h * w * 2);
    for q in &quads {
        for p in sample_grid(&project_quad(q, stride), h, w)?.points {
            out.push(p.x);
            out.push(p.y);
        }
    }
    Ok(out)
}

/// Indices of kept detections, best first.
pub fn pnms_indices<T: Scalar>(quads: &[T], scores: &[T], iou_thresh: T) -> Result<Vec<usize>> {
    let quads = quads_from_flat(quads)?;
    if quads.len() != scores.len() {
        return Err(Error::ShapeMismatch(format!("{} quads but {} scores", quads.len(), scores.len())));
    }
    if let Some(s) = scores.iter().find(|s| !(**s >= T::zero() && **s <= T::one())) {
        return Err(Error::InvalidConfig(format!("score {s} outside [0, 1]")));
    }
    let dets: Vec<Detection<T>> =
        quads.iter().zip(scores).map(|(q, s)| Detection::new(*q, *s)).collect::<Result<_>>()?;
    let kept = pnms(&dets, iou_thresh);
    // Quads are unique per index only up to equality, so recover indices in
    // the same score order pnms used.
    let mut taken = vec![false; dets.len()];
    Ok(kept
        .iter()
        .map(|k| {
            let i = (0..dets.len()).find(|&i| !taken[i] && dets[i] == *k).expect("kept detection comes from input");
            taken[i] = true;
            i
        })
        .collect())
}

pub fn iou<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    let (qa, qb) = (quads_from_flat(a)?, quads_from_flat(b)?);
    match (qa.as_slice(), qb.as_slice()) {
        ([x], [y]) => Ok(iou_quad(x, y)),
        _ => Err(Error::ShapeMismatch("iou expects exactly one quad per side".into())),
    }
}

/// Pyramid targets for `N x 8` ground truths, serialized as a target blob.
pub fn targets_blob<T: Scalar>(
    quads: &[T],
    ignore: &[bool],
    width: usize,
    height: usize,
    shrink_ratio: T,
    levels: &[LevelSpec],
) -> Result<Vec<u8>> {
    let quads = quads_from_flat(quads)?;
    if quads.len() != ignore.len() {
        return Err(Error::ShapeMismatch(format!("{} quads but {} ignore flags", quads.len(), ignore.len())));
    }
    let gts: Vec<_> = quads.into_iter().zip(ignore).map(|(q, i)| GroundTruth::new(q, *i)).collect();
    Ok(encode_targets(&build_pyramid_targets(&gts, levels, width, height, shrink_ratio)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_grid_buffer() {
        let g = sample_grids(&[0., 0., 8., 0., 8., 8., 0., 8.], 4, 3, 3).unwrap();
        let expect: Vec<f64> = (0..9).flat_map(|t| [(t % 3) as f64, (t / 3) as f64]).collect();
        assert_eq!(g, expect);
        assert!(sample_grids::<f64>(&[], 4, 3, 3).unwrap().is_empty());
        assert!(matches!(sample_grids(&[0.0f64; 7], 4, 3, 3), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn pnms_buffer() {
        let quads = [0., 0., 1., 0., 1., 1., 0., 1., 0., 0., 1., 0., 1., 1., 0., 1., 5., 5., 6., 5., 6., 6., 5., 6.];
        assert_eq!(pnms_indices(&quads, &[0.5, 0.9, 0.7], 0.3).unwrap(), vec![1, 2]);
        assert!(pnms_indices::<f64>(&[], &[], 0.3).unwrap().is_empty());
        assert!(pnms_indices(&quads, &[0.5, 1.2, 0.7], 0.3).is_err());
        assert!(pnms_indices(&quads, &[0.5], 0.3).is_err());
    }

    #[test]
    fn iou_and_targets_buffers() {
        let a: [f64; 8] = [0., 0., 1., 0., 1., 1., 0., 1.];
        let b = [0.5, 0., 1.5, 0., 1.5, 1., 0.5, 1.];
        assert!((iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(iou(&a, &[]).is_err());
        let blob = targets_blob(&[0., 0., 32., 0., 32., 32., 0., 32.], &[false], 64, 64, 0.25, &LevelSpec::pyramid()).unwrap();
        assert_eq!(&blob[..4], b"QTGT");
        assert!(targets_blob(&a, &[], 64, 64, 0.25, &LevelSpec::pyramid()).is_err());
    }
}
