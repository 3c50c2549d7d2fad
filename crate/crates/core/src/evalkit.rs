//! Annotation and detection file I/O and IoU-thresholded evaluation.
//!
//! Ground-truth files are named `gt_<stem>.txt` with lines
//! `x1,y1,x2,y2,x3,y3,x4,y4,transcription`; a transcription of `###` marks
//! a do-not-care region. Detection files are named `<stem>.txt` with lines
//! `x1,y1,...,x4,y4,score`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};
use std::path::Path;

use crate::error::{Error, Result};
use crate::postprocess::Detection;
use crate::quadgeom::{area, iou_quad, GroundTruth, Quad};
use crate::scalar::Scalar;

pub const DO_NOT_CARE: &str = "###";

/// Parsed records plus the number of lines dropped for invalid geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<R> {
    pub items: Vec<R>,
    pub skipped: Vec<usize>,
}

fn parse_coords<T: Scalar>(fields: &[&str], line: usize) -> Result<[T; 8]> {
    let mut out = [T::zero(); 8];
    for (k, f) in fields.iter().take(8).enumerate() {
        let v: f64 = f
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad coordinate {:?}", f.trim()) })?;
        if !v.is_finite() {
            return Err(Error::Parse { line, msg: format!("non-finite coordinate {:?}", f.trim()) });
        }
        out[k] = T::lit(v);
    }
    Ok(out)
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.strip_prefix('\u{feff}')
        .unwrap_or(text)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses a ground-truth file. The transcription is everything after the
/// eighth comma, so it may itself contain commas.
pub fn parse_gt_file<T: Scalar>(text: &str) -> Result<Parsed<GroundTruth<T>>> {
    let mut out = Parsed { items: Vec::new(), skipped: Vec::new() };
    for (line, l) in lines(text) {
        let fields: Vec<&str> = l.splitn(9, ',').collect();
        if fields.len() < 8 {
            return Err(Error::Parse { line, msg: format!("expected 8 coordinates, got {}", fields.len()) });
        }
        let coords = parse_coords::<T>(&fields, line)?;
        let transcription = fields.get(8).map(|s| s.trim()).unwrap_or("");
        match Quad::from_coords(coords) {
            Ok(quad) => out.items.push(GroundTruth::new(quad, transcription == DO_NOT_CARE)),
            Err(_) => out.skipped.push(line),
        }
    }
    Ok(out)
}

pub fn parse_det_file<T: Scalar>(text: &str) -> Result<Parsed<Detection<T>>> {
    let mut out = Parsed { items: Vec::new(), skipped: Vec::new() };
    for (line, l) in lines(text) {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse { line, msg: format!("expected 9 fields, got {}", fields.len()) });
        }
        let coords = parse_coords::<T>(&fields, line)?;
        let raw = fields[8].trim();
        let score: f64 = raw.parse().map_err(|_| Error::Parse { line, msg: format!("bad score {raw:?}") })?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Parse { line, msg: format!("score {score} outside [0, 1]") });
        }
        match Quad::from_coords(coords) {
            Ok(quad) => out.items.push(Detection { quad, score: T::lit(score) }),
            Err(_) => out.skipped.push(line),
        }
    }
    Ok(out)
}

/// One line per detection, shortest round-trip formatting.
pub fn format_det_file<T: Scalar>(dets: &[Detection<T>]) -> String {
    let mut s = String::new();
    for d in dets {
        for c in d.quad.coords() {
            let _ = write!(s, "{c},");
        }
        let _ = writeln!(s, "{}", d.score);
    }
    s
}

pub fn format_gt_file<T: Scalar>(gts: &[(GroundTruth<T>, &str)]) -> String {
    let mut s = String::new();
    for (g, text) in gts {
        for c in g.quad.coords() {
            let _ = write!(s, "{c},");
        }
        let _ = writeln!(s, "{}", if g.ignore { DO_NOT_CARE } else { text });
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Detections excluded because they mostly cover a do-not-care region.
    pub discarded: usize,
}

impl Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            true_positives: self.true_positives + o.true_positives,
            false_positives: self.false_positives + o.false_positives,
            false_negatives: self.false_negatives + o.false_negatives,
            discarded: self.discarded + o.discarded,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

/// Greedy one-to-one matching in descending score order.
///
/// Each detection first looks at its best overlap among all ground truths;
/// if that overlap reaches `tau` and belongs to a do-not-care region the
/// detection is discarded. Otherwise it takes the unmatched normal ground
/// truth with the highest IoU at or above `tau`, or counts as a false
/// positive.
pub fn match_and_score<T: Scalar>(dets: &[Detection<T>], gts: &[GroundTruth<T>], tau: T) -> Counts {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap_or(std::cmp::Ordering::Equal));
    let mut matched = vec![false; gts.len()];
    let mut counts = Counts::default();
    for &di in &order {
        let ious: Vec<T> = gts.iter().map(|g| iou_quad(&dets[di].quad, &g.quad)).collect();
        let best_any = argmax(ious.iter().copied().enumerate());
        if let Some((gi, v)) = best_any {
            if v >= tau && gts[gi].ignore {
                counts.discarded += 1;
                continue;
            }
        }
        let candidates = ious.iter().copied().enumerate().filter(|&(gi, v)| !gts[gi].ignore && !matched[gi] && v >= tau);
        match argmax(candidates) {
            Some((gi, _)) => {
                matched[gi] = true;
                counts.true_positives += 1;
            }
            None => counts.false_positives += 1,
        }
    }
    counts.false_negatives = gts.iter().zip(&matched).filter(|(g, m)| !g.ignore && !**m).count();
    counts
}

/// First index attaining the maximum value.
fn argmax<T: Scalar>(it: impl Iterator<Item = (usize, T)>) -> Option<(usize, T)> {
    it.fold(None, |best, (i, v)| match best {
        Some((_, b)) if b >= v => best,
        _ => Some((i, v)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub tau: f64,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl EvalResult {
    /// P = 1 with no detections, R = 1 with no ground truth, F = 0 when
    /// P + R = 0.
    pub fn from_counts(tau: f64, counts: Counts) -> Self {
        let tp = counts.true_positives as f64;
        let ratio = |den: usize| if den == 0 { 1.0 } else { tp / den as f64 };
        let precision = ratio(counts.true_positives + counts.false_positives);
        let recall = ratio(counts.true_positives + counts.false_negatives);
        let f_measure = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { tau, counts, precision, recall, f_measure }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalOptions {
    /// When set, ground truths smaller than this many px² become
    /// do-not-care and smaller detections are dropped.
    pub min_area: Option<f64>,
}

/// Ground truths and detections of one image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageRecord<T> {
    pub gts: Vec<GroundTruth<T>>,
    pub dets: Vec<Detection<T>>,
}

impl<T: Scalar> ImageRecord<T> {
    fn filtered(&self, opts: &EvalOptions) -> (Vec<GroundTruth<T>>, Vec<Detection<T>>) {
        let Some(min) = opts.min_area else {
            return (self.gts.clone(), self.dets.clone());
        };
        let small = |q: &Quad<T>| area(q).to_f64().unwrap_or(0.0) < min;
        let gts = self.gts.iter().map(|g| GroundTruth::new(g.quad, g.ignore || small(&g.quad))).collect();
        let dets = self.dets.iter().filter(|d| !small(&d.quad)).copied().collect();
        (gts, dets)
    }
}

/// Sums per-image counts for every threshold. Counts are integers, so the
/// result does not depend on image order.
pub fn evaluate_images<T: Scalar>(images: &[ImageRecord<T>], taus: &[f64], opts: &EvalOptions) -> Vec<EvalResult> {
    let prepared: Vec<_> = images.iter().map(|im| im.filtered(opts)).collect();
    taus.iter()
        .map(|&tau| {
            let total = prepared
                .iter()
                .map(|(g, d)| match_and_score(d, g, T::lit(tau)))
                .fold(Counts::default(), Add::add);
            EvalResult::from_counts(tau, total)
        })
        .collect()
}

fn stems(dir: &Path, prefix: &str) -> Result<BTreeMap<String, std::path::PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if !path.is_file() || path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(name) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if let Some(stem) = name.strip_prefix(prefix) {
            out.insert(stem.to_string(), path.clone());
        }
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn with_file(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    }
}

/// Loads a dataset laid out as `gt_dir/gt_<stem>.txt` and
/// `det_dir/<stem>.txt`, sorted by stem. A ground-truth file without a
/// detection file means no detections; a detection file without ground
/// truth is an error.
pub fn load_dataset<T: Scalar>(gt_dir: &Path, det_dir: &Path) -> Result<(Vec<ImageRecord<T>>, usize)> {
    let gts = stems(gt_dir, "gt_")?;
    let dets = stems(det_dir, "")?;
    let orphans: Vec<String> = dets.keys().filter(|s| !gts.contains_key(*s)).cloned().collect();
    if !orphans.is_empty() {
        return Err(Error::MissingFile(orphans));
    }
    let mut skipped = 0;
    let mut images = Vec::with_capacity(gts.len());
    for (stem, gt_path) in &gts {
        let g = parse_gt_file::<T>(&read(gt_path)?).map_err(|e| with_file(e, gt_path))?;
        skipped += g.skipped.len();
        let d = match dets.get(stem) {
            Some(p) => {
                let d = parse_det_file::<T>(&read(p)?).map_err(|e| with_file(e, p))?;
                skipped += d.skipped.len();
                d.items
            }
            None => Vec::new(),
        };
        images.push(ImageRecord { gts: g.items, dets: d });
    }
    Ok((images, skipped))
}

/// Evaluates a dataset directory pair at every threshold.
pub fn evaluate(gt_dir: &Path, det_dir: &Path, taus: &[f64], opts: &EvalOptions) -> Result<Vec<EvalResult>> {
    let (images, _) = load_dataset::<f64>(gt_dir, det_dir)?;
    Ok(evaluate_images(&images, taus, opts))
}

/// `tau,TP,FP,FN,P,R,F` rows, reals to six decimals.
pub fn format_report(results: &[EvalResult]) -> String {
    let mut s = String::from("tau,TP,FP,FN,P,R,F\n");
    for r in results {
        let _ = writeln!(
            s,
            "{:.6},{},{},{},{:.6},{:.6},{:.6}",
            r.tau,
            r.counts.true_positives,
            r.counts.false_positives,
            r.counts.false_negatives,
            r.precision,
            r.recall,
            r.f_measure
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, s: f64) -> Quad<f64> {
        Quad::rect(x, y, x + s, y + s).unwrap()
    }

    fn det(q: Quad<f64>, score: f64) -> Detection<f64> {
        Detection::new(q, score).unwrap()
    }

    #[test]
    fn parse_gt_examples() {
        let g = parse_gt_file::<f64>("0,0,10,0,10,10,0,10,hello").unwrap();
        assert_eq!(g.items, vec![GroundTruth::new(square(0., 0., 10.), false)]);
        let g = parse_gt_file::<f64>("\n0,0,10,0,10,10,0,10,###\n\n").unwrap();
        assert!(g.items[0].ignore);
        assert_eq!(parse_gt_file::<f64>("0,0,10,0,xx").unwrap_err(), Error::Parse {
            line: 1,
            msg: "expected 8 coordinates, got 5".into()
        });
        let bad = parse_gt_file::<f64>("0,0,10,0,10,10,0,10,a\n0,0,10,0,xx,10,0,10,b").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn parse_gt_tolerates_commas_bom_and_bad_geometry() {
        let text = "\u{feff}1.5,0,10,0,10,10,0,10,a,b,c\r\n0,0,1,1,1,0,0,1,bow\n";
        let g = parse_gt_file::<f64>(text).unwrap();
        assert_eq!(g.items.len(), 1);
        assert_eq!(g.skipped, vec![2]);
        let untranscribed = parse_gt_file::<f64>("0,0,10,0,10,10,0,10").unwrap();
        assert!(!untranscribed.items[0].ignore);
    }

    #[test]
    fn parse_det_examples() {
        let d = parse_det_file::<f64>("0,0,10,0,10,10,0,10,0.93").unwrap();
        assert_eq!(d.items, vec![det(square(0., 0., 10.), 0.93)]);
        assert!(parse_det_file::<f64>("").unwrap().items.is_empty());
        assert!(matches!(parse_det_file::<f64>("0,0,10,0,10,10,0,10,1.5"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_det_file::<f64>("0,0,10,0,10,10,0,10"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn det_file_round_trips() {
        let dets = vec![det(square(0.1, 0.2, 3.3), 0.5), det(square(7., 7., 1.), 1.0)];
        assert_eq!(parse_det_file::<f64>(&format_det_file(&dets)).unwrap().items, dets);
        let gts = [(GroundTruth::new(square(1., 1., 2.), true), "x")];
        let back = parse_gt_file::<f64>(&format_gt_file(&gts)).unwrap();
        assert_eq!(back.items, vec![gts[0].0]);
    }

    #[test]
    fn match_examples() {
        let g = GroundTruth::new(square(0., 0., 10.), false);
        let c = match_and_score(&[det(square(0., 0., 10.), 0.9)], &[g], 0.5);
        assert_eq!((c.true_positives, c.false_positives, c.false_negatives), (1, 0, 0));
        let r = EvalResult::from_counts(0.5, c);
        assert_eq!((r.precision, r.recall, r.f_measure), (1.0, 1.0, 1.0));

        let dnc = GroundTruth::new(square(0., 0., 10.), true);
        let c = match_and_score(&[det(square(0., 0., 9.5), 0.9)], &[dnc], 0.5);
        assert_eq!((c.true_positives, c.false_positives, c.false_negatives, c.discarded), (0, 0, 0, 1));

        let two = [det(square(0., 0., 10.), 0.7), det(square(0.5, 0., 10.), 0.9)];
        let c = match_and_score(&two, &[g], 0.5);
        assert_eq!((c.true_positives, c.false_positives, c.false_negatives), (1, 1, 0));
    }

    #[test]
    fn degenerate_denominators() {
        let none = EvalResult::from_counts(0.5, Counts { false_negatives: 3, ..Counts::default() });
        assert_eq!((none.precision, none.recall, none.f_measure), (1.0, 0.0, 0.0));
        let empty = EvalResult::from_counts(0.5, Counts::default());
        assert_eq!((empty.precision, empty.recall, empty.f_measure), (1.0, 1.0, 1.0));
        let wrong = EvalResult::from_counts(0.5, Counts { false_positives: 2, false_negatives: 2, ..Counts::default() });
        assert_eq!(wrong.f_measure, 0.0);
    }

    #[test]
    fn min_area_filter() {
        let im = ImageRecord {
            gts: vec![GroundTruth::new(square(0., 0., 2.), false), GroundTruth::new(square(50., 50., 20.), false)],
            dets: vec![det(square(100., 100., 3.), 0.9), det(square(50., 50., 20.), 0.8)],
        };
        let plain = evaluate_images(std::slice::from_ref(&im), &[0.5], &EvalOptions::default());
        assert_eq!(plain[0].counts, Counts { true_positives: 1, false_positives: 1, false_negatives: 1, discarded: 0 });
        let filtered = evaluate_images(&[im], &[0.5], &EvalOptions { min_area: Some(10.0) });
        assert_eq!(filtered[0].counts, Counts { true_positives: 1, ..Counts::default() });
    }

    #[test]
    fn report_format() {
        let r = EvalResult::from_counts(0.75, Counts { true_positives: 1, false_positives: 1, false_negatives: 0, discarded: 0 });
        assert_eq!(format_report(&[r]), "tau,TP,FP,FN,P,R,F\n0.750000,1,1,0,0.500000,1.000000,0.666667\n");
    }
}
