use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, Detection};

/// Intersection over union. Degenerate boxes are an error.
pub fn iou(b1: &BoundingBox, b2: &BoundingBox) -> Result<f64> {
    for b in [b1, b2] {
        if b.is_degenerate() {
            return Err(Error::Validation(format!("degenerate box {:?}", <[f64; 4]>::from(*b))));
        }
    }
    Ok(overlap(b1, b2))
}

/// IoU without validation; 0 when the union is empty.
pub(crate) fn overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union > 0.0 && inter > 0.0 {
        (inter / union).min(1.0)
    } else {
        0.0
    }
}

/// Detections and ground truth of one image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageDetections {
    pub frame_id: String,
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<BoundingBox>,
}

/// Outcome of greedy matching on one image. Vectors are indexed like the
/// input detections.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub is_tp: Vec<bool>,
    pub matched_gt: Vec<Option<usize>>,
    /// Ground-truth boxes no detection claimed.
    pub unmatched_gt: usize,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.is_tp.iter().filter(|&&t| t).count()
    }

    pub fn fp(&self) -> usize {
        self.is_tp.len() - self.tp()
    }
}

/// Indices of `dets` by descending confidence, ties in input order.
pub(crate) fn confidence_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[j].confidence.total_cmp(&dets[i].confidence));
    order
}

/// Greedy matching: in confidence order, each detection claims the still
/// unmatched ground-truth box of highest IoU (lowest index on ties) when
/// that IoU reaches `iou_thresh`; otherwise it is a false positive.
pub fn match_detections(dets: &[Detection], gts: &[BoundingBox], iou_thresh: f64) -> MatchResult {
    let mut taken = vec![false; gts.len()];
    let mut is_tp = vec![false; dets.len()];
    let mut matched_gt = vec![None; dets.len()];
    for i in confidence_order(dets) {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let v = overlap(&dets[i].bbox, gt);
            if v >= iou_thresh && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            is_tp[i] = true;
            matched_gt[i] = Some(g);
        }
    }
    MatchResult {
        is_tp,
        matched_gt,
        unmatched_gt: taken.iter().filter(|&&t| !t).count(),
    }
}

/// Precision, recall and F1 as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// F1 from precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Counts over a test set after dropping detections below `conf_thresh`.
/// Precision is 1 with no detections, recall is 1 with no ground truth.
pub fn precision_recall_f1(images: &[ImageDetections], conf_thresh: f64, iou_thresh: f64) -> Prf {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for img in images {
        let kept: Vec<Detection> = img.detections.iter().filter(|d| d.confidence >= conf_thresh).copied().collect();
        let m = match_detections(&kept, &img.ground_truth, iou_thresh);
        tp += m.tp();
        fp += m.fp();
        fn_ += m.unmatched_gt;
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
        tp,
        fp,
        fn_,
    }
}
