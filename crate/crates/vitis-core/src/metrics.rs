//! Detection and segmentation scoring: box/mask IoU, greedy one-to-one
//! matching in confidence order, 11-point interpolated average precision,
//! and dataset-level precision/recall/F1 over accumulated counts.
//!
//! Conventions, applied uniformly:
//!
//! * matching walks predictions by descending confidence (ties keep input
//!   order) and assigns each to the unmatched ground-truth region of
//!   highest IoU at or above the threshold (ties keep the lowest index);
//! * the confidence threshold filters predictions for the counting metrics
//!   only — average precision always consumes the full ranking;
//! * with empty predictions *and* empty ground truth, precision, recall,
//!   and F1 are all 1; if exactly one denominator is zero, that metric is
//!   0; F1 is 0 whenever precision + recall is 0.

use rayon::prelude::*;
use thiserror::Error;

use crate::mask::{Bitmap, InstanceMask};
use crate::num::Real;
use crate::yolo::PixelBox;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mask rasters differ: {a:?} vs {b:?}")]
    MaskDims { a: (u32, u32), b: (u32, u32) },
    #[error("image {image_id:?}: prediction raster {pred:?} does not match ground truth {gt:?}")]
    SemanticDims { image_id: String, pred: (u32, u32), gt: (u32, u32) },
    #[error("IoU thresholds must be strictly increasing within (0, 1], got {0:?}")]
    Thresholds(Vec<f64>),
    #[error("confidence threshold {0} outside [0, 1]")]
    Confidence(f64),
}

/// Anything that can be scored with intersection-over-union.
pub trait RegionOverlap<F> {
    fn iou(&self, other: &Self) -> Result<F, MetricsError>;
}

impl<F: Real> RegionOverlap<F> for PixelBox<F> {
    fn iou(&self, other: &Self) -> Result<F, MetricsError> {
        Ok(box_iou(self, other))
    }
}

impl<F: Real> RegionOverlap<F> for InstanceMask<F> {
    fn iou(&self, other: &Self) -> Result<F, MetricsError> {
        mask_iou(self, other)
    }
}

/// IoU of two pixel boxes; 0 when they are disjoint or degenerate.
pub fn box_iou<F: Real>(a: &PixelBox<F>, b: &PixelBox<F>) -> F {
    let zero = F::zero();
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(zero);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(zero);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= zero {
        return zero;
    }
    inter / union
}

/// IoU of two masks over the same raster.
pub fn mask_iou<F: Real>(a: &InstanceMask<F>, b: &InstanceMask<F>) -> Result<F, MetricsError> {
    let (da, db) = ((a.width(), a.height()), (b.width(), b.height()));
    if da != db {
        return Err(MetricsError::MaskDims { a: da, b: db });
    }
    let inter = a.bitmap().intersection_count(b.bitmap());
    let union = a.popcount() + b.popcount() - inter;
    if union == 0 {
        return Ok(F::zero());
    }
    Ok(F::from_count(inter) / F::from_count(union))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn accumulate(&mut self, other: ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf<F> {
    pub precision: F,
    pub recall: F,
    pub f1: F,
}

/// Precision, recall, and F1 with the zero-denominator conventions from the
/// module docs.
pub fn prf<F: Real>(c: ConfusionCounts) -> Prf<F> {
    let (zero, one) = (F::zero(), F::one());
    if c.tp == 0 && c.fp == 0 && c.fn_ == 0 {
        return Prf { precision: one, recall: one, f1: one };
    }
    let tp = F::from_count(c.tp);
    let precision = if c.tp + c.fp == 0 { zero } else { tp / F::from_count(c.tp + c.fp) };
    let recall = if c.tp + c.fn_ == 0 { zero } else { tp / F::from_count(c.tp + c.fn_) };
    Prf { precision, recall, f1: f1_score(precision, recall) }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score<F: Real>(precision: F, recall: F) -> F {
    let denom = precision + recall;
    if denom > F::zero() {
        F::from_u8(2).unwrap() * precision * recall / denom
    } else {
        F::zero()
    }
}

/// A scored prediction region.
#[derive(Debug, Clone)]
pub struct Detection<R, F> {
    pub region: R,
    pub confidence: F,
}

/// One prediction in ranking order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedPrediction<F> {
    pub pred_index: usize,
    pub confidence: F,
    pub matched: bool,
}

#[derive(Debug, Clone)]
pub struct MatchOutcome<F> {
    /// `(prediction index, ground-truth index)` pairs in assignment order.
    pub pairs: Vec<(usize, usize)>,
    pub counts: ConfusionCounts,
    /// Every prediction, sorted by descending confidence (input order on
    /// ties), with its match flag.
    pub ranking: Vec<RankedPrediction<F>>,
}

impl<F: Real> MatchOutcome<F> {
    /// Confusion counts restricted to predictions at or above `threshold`.
    /// Because the greedy scan visits high-confidence predictions first,
    /// this equals re-matching with the filtered subset.
    pub fn counts_at_confidence(&self, threshold: F, n_gt: usize) -> ConfusionCounts {
        let mut tp = 0u64;
        let mut fp = 0u64;
        for r in self.ranking.iter().filter(|r| r.confidence >= threshold) {
            if r.matched {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        ConfusionCounts { tp, fp, fn_: n_gt as u64 - tp }
    }
}

/// Greedy one-to-one assignment of predictions to ground truth at an IoU
/// threshold.
pub fn match_instances<R: RegionOverlap<F>, F: Real>(
    preds: &[Detection<R, F>],
    gts: &[R],
    iou_threshold: F,
) -> Result<MatchOutcome<F>, MetricsError> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b].confidence.partial_cmp(&preds[a].confidence).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut gt_taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    let mut ranking = Vec::with_capacity(preds.len());
    for &pi in &order {
        let mut best: Option<(usize, F)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if gt_taken[gi] {
                continue;
            }
            let iou = preds[pi].region.iou(gt)?;
            if iou < iou_threshold {
                continue;
            }
            // Strict comparison keeps the lowest ground-truth index on ties.
            if best.map(|(_, b)| iou > b).unwrap_or(true) {
                best = Some((gi, iou));
            }
        }
        let matched = if let Some((gi, _)) = best {
            gt_taken[gi] = true;
            pairs.push((pi, gi));
            true
        } else {
            false
        };
        ranking.push(RankedPrediction { pred_index: pi, confidence: preds[pi].confidence, matched });
    }
    let tp = pairs.len() as u64;
    let counts = ConfusionCounts {
        tp,
        fp: preds.len() as u64 - tp,
        fn_: gts.len() as u64 - tp,
    };
    Ok(MatchOutcome { pairs, counts, ranking })
}

/// 11-point interpolated average precision over a ranked match list:
/// the mean over recall levels {0, 0.1, ..., 1.0} of the highest precision
/// achieved at recall >= that level.
pub fn eleven_point_ap<F: Real>(matched_in_rank_order: &[bool], n_gt: u64) -> F {
    if n_gt == 0 {
        return if matched_in_rank_order.is_empty() { F::one() } else { F::zero() };
    }
    let mut curve = Vec::with_capacity(matched_in_rank_order.len());
    let mut tp = 0u64;
    for (i, &m) in matched_in_rank_order.iter().enumerate() {
        tp += m as u64;
        let precision = F::from_count(tp) / F::from_count(i as u64 + 1);
        let recall = F::from_count(tp) / F::from_count(n_gt);
        curve.push((recall, precision));
    }
    let ten = F::from_u8(10).unwrap();
    let mut total = F::zero();
    for level in 0..=10u8 {
        let r = F::from_u8(level).unwrap() / ten;
        let best = curve
            .iter()
            .filter(|(recall, _)| *recall >= r)
            .map(|(_, p)| *p)
            .fold(F::zero(), F::max);
        total = total + best;
    }
    total / F::from_u8(11).unwrap()
}

/// Convenience single-collection AP: match, then interpolate.
pub fn average_precision<R: RegionOverlap<F>, F: Real>(
    preds: &[Detection<R, F>],
    gts: &[R],
    iou_threshold: F,
) -> Result<F, MetricsError> {
    let outcome = match_instances(preds, gts, iou_threshold)?;
    let flags: Vec<bool> = outcome.ranking.iter().map(|r| r.matched).collect();
    Ok(eleven_point_ap(&flags, gts.len() as u64))
}

/// Pixel confusion between a predicted and a ground-truth foreground union.
pub fn confusion_semantic(pred: &Bitmap, gt: &Bitmap) -> Result<ConfusionCounts, MetricsError> {
    if pred.dims() != gt.dims() {
        return Err(MetricsError::MaskDims { a: pred.dims(), b: gt.dims() });
    }
    let tp = pred.intersection_count(gt);
    Ok(ConfusionCounts { tp, fp: pred.count_ones() - tp, fn_: gt.count_ones() - tp })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Semantic,
    Boxes,
    Instances,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Task::Semantic => "semantic",
            Task::Boxes => "boxes",
            Task::Instances => "instances",
        }
    }
}

/// Predictions and ground truth for one image of a detection task.
#[derive(Debug, Clone)]
pub struct DetectionImage<R, F> {
    pub image_id: String,
    pub preds: Vec<Detection<R, F>>,
    pub gts: Vec<R>,
}

/// Foreground unions for one image of the semantic task.
#[derive(Debug, Clone)]
pub struct SemanticImage {
    pub image_id: String,
    pub pred: Bitmap,
    pub gt: Bitmap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow<F> {
    pub iou: Option<F>,
    pub ap: Option<F>,
    pub counts: ConfusionCounts,
    pub prf: Prf<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerImageRow<F> {
    pub image_id: String,
    pub iou: Option<F>,
    pub counts: ConfusionCounts,
    pub prf: Prf<F>,
}

/// Dataset-level evaluation report: one row per IoU threshold (a single
/// row for the semantic task), with per-image diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<F> {
    pub task: Task,
    pub confidence_threshold: F,
    pub rows: Vec<EvalRow<F>>,
    pub per_image: Vec<PerImageRow<F>>,
    pub warnings: Vec<String>,
}

/// Scores a detection task over a dataset. Counts are accumulated across
/// images before computing precision/recall/F1; AP pools all predictions
/// into one ranking with per-image match flags.
pub fn evaluate_detections<R, F>(
    task: Task,
    images: &[DetectionImage<R, F>],
    iou_thresholds: &[F],
    confidence_threshold: F,
) -> Result<EvalReport<F>, MetricsError>
where
    R: RegionOverlap<F> + Sync,
    F: Real,
{
    validate_thresholds(iou_thresholds)?;
    validate_confidence(confidence_threshold)?;
    let n_gt_total: u64 = images.iter().map(|i| i.gts.len() as u64).sum();
    let n_pred_total: usize = images.iter().map(|i| i.preds.len()).sum();

    let mut rows = Vec::with_capacity(iou_thresholds.len());
    let mut per_image = Vec::new();
    let mut warnings = Vec::new();
    if n_gt_total == 0 {
        warnings.push(format!(
            "no ground-truth instances: average precision degenerates to {}",
            if n_pred_total == 0 { 1 } else { 0 }
        ));
    }

    for &threshold in iou_thresholds {
        let outcomes: Vec<MatchOutcome<F>> = images
            .par_iter()
            .map(|image| match_instances(&image.preds, &image.gts, threshold))
            .collect::<Result<_, _>>()?;

        let mut counts = ConfusionCounts::default();
        for (image, outcome) in images.iter().zip(&outcomes) {
            let image_counts = outcome.counts_at_confidence(confidence_threshold, image.gts.len());
            counts.accumulate(image_counts);
            per_image.push(PerImageRow {
                image_id: image.image_id.clone(),
                iou: Some(threshold),
                counts: image_counts,
                prf: prf(image_counts),
            });
        }

        // Pool the per-image rankings into one dataset ranking; image order
        // breaks confidence ties deterministically.
        let mut pooled: Vec<(F, usize, usize, bool)> = Vec::with_capacity(n_pred_total);
        for (img_idx, outcome) in outcomes.iter().enumerate() {
            for (rank_idx, r) in outcome.ranking.iter().enumerate() {
                pooled.push((r.confidence, img_idx, rank_idx, r.matched));
            }
        }
        pooled.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let flags: Vec<bool> = pooled.iter().map(|p| p.3).collect();
        let ap = eleven_point_ap(&flags, n_gt_total);

        rows.push(EvalRow { iou: Some(threshold), ap: Some(ap), counts, prf: prf(counts) });
    }

    Ok(EvalReport { task, confidence_threshold, rows, per_image, warnings })
}

/// Scores foreground segmentation as one pixel-level confusion accumulated
/// over the dataset. The report has a single row with no IoU or AP column.
pub fn evaluate_semantic<F: Real>(
    images: &[SemanticImage],
    confidence_threshold: F,
) -> Result<EvalReport<F>, MetricsError> {
    validate_confidence(confidence_threshold)?;
    let mut counts = ConfusionCounts::default();
    let mut per_image = Vec::with_capacity(images.len());
    for image in images {
        if image.pred.dims() != image.gt.dims() {
            return Err(MetricsError::SemanticDims {
                image_id: image.image_id.clone(),
                pred: image.pred.dims(),
                gt: image.gt.dims(),
            });
        }
        let c = confusion_semantic(&image.pred, &image.gt)?;
        counts.accumulate(c);
        per_image.push(PerImageRow {
            image_id: image.image_id.clone(),
            iou: None,
            counts: c,
            prf: prf(c),
        });
    }
    Ok(EvalReport {
        task: Task::Semantic,
        confidence_threshold,
        rows: vec![EvalRow { iou: None, ap: None, counts, prf: prf(counts) }],
        per_image,
        warnings: Vec::new(),
    })
}

fn validate_thresholds<F: Real>(thresholds: &[F]) -> Result<(), MetricsError> {
    let as_f64: Vec<f64> = thresholds.iter().map(|t| t.to_f64().unwrap_or(f64::NAN)).collect();
    let ok = !thresholds.is_empty()
        && as_f64.iter().all(|t| *t > 0.0 && *t <= 1.0)
        && as_f64.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(MetricsError::Thresholds(as_f64))
    }
}

fn validate_confidence<F: Real>(threshold: F) -> Result<(), MetricsError> {
    let t = threshold.to_f64().unwrap_or(f64::NAN);
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(MetricsError::Confidence(t))
    }
}

impl<F: Real> EvalReport<F> {
    /// JSON encoding with stable key order and six-decimal numbers.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        out.push_str("  \"schema\": \"eval-report/v1\",\n");
        out.push_str(&format!("  \"task\": \"{}\",\n", self.task.label()));
        out.push_str("  \"aggregation\": \"accumulated-counts\",\n");
        out.push_str("  \"ap_definition\": \"interpolated-11-point\",\n");
        out.push_str(&format!(
            "  \"confidence_threshold\": {},\n",
            fmt6(Some(self.confidence_threshold))
        ));
        out.push_str("  \"rows\": [\n");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "    {{\"iou\": {}, \"ap\": {}, \"precision\": {}, \"recall\": {}, \"f1\": {}, \
                 \"tp\": {}, \"fp\": {}, \"fn\": {}}}{}\n",
                fmt6(row.iou),
                fmt6(row.ap),
                fmt6(Some(row.prf.precision)),
                fmt6(Some(row.prf.recall)),
                fmt6(Some(row.prf.f1)),
                row.counts.tp,
                row.counts.fp,
                row.counts.fn_,
                comma(i, self.rows.len()),
            ));
        }
        out.push_str("  ],\n");
        out.push_str("  \"per_image\": [\n");
        for (i, row) in self.per_image.iter().enumerate() {
            out.push_str(&format!(
                "    {{\"image_id\": {}, \"iou\": {}, \"precision\": {}, \"recall\": {}, \
                 \"f1\": {}, \"tp\": {}, \"fp\": {}, \"fn\": {}}}{}\n",
                serde_json::to_string(&row.image_id).expect("string encoding"),
                fmt6(row.iou),
                fmt6(Some(row.prf.precision)),
                fmt6(Some(row.prf.recall)),
                fmt6(Some(row.prf.f1)),
                row.counts.tp,
                row.counts.fp,
                row.counts.fn_,
                comma(i, self.per_image.len()),
            ));
        }
        out.push_str("  ],\n");
        out.push_str("  \"warnings\": [");
        let encoded: Vec<String> = self
            .warnings
            .iter()
            .map(|w| serde_json::to_string(w).expect("string encoding"))
            .collect();
        out.push_str(&encoded.join(", "));
        out.push_str("]\n}\n");
        out
    }

    /// CSV encoding of the dataset rows (semantic rows leave `iou`/`ap`
    /// empty), matching the JSON numbers digit for digit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iou,ap,precision,recall,f1,tp,fp,fn\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                csv6(row.iou),
                csv6(row.ap),
                csv6(Some(row.prf.precision)),
                csv6(Some(row.prf.recall)),
                csv6(Some(row.prf.f1)),
                row.counts.tp,
                row.counts.fp,
                row.counts.fn_,
            ));
        }
        out
    }
}

fn fmt6<F: Real>(x: Option<F>) -> String {
    match x {
        Some(x) => format!("{x:.6}"),
        None => "null".into(),
    }
}

fn csv6<F: Real>(x: Option<F>) -> String {
    match x {
        Some(x) => format!("{x:.6}"),
        None => String::new(),
    }
}

fn comma(i: usize, len: usize) -> &'static str {
    if i + 1 == len {
        ""
    } else {
        ","
    }
}
