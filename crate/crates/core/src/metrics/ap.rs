use super::matching::{confidence_order, match_detections, ImageDetections};
use crate::error::{Error, Result};

/// Number of recall sample points of the interpolated AP.
pub const RECALL_POINTS: usize = 101;

/// AP of an already ranked list of TP/FP flags against `n_gt` ground-truth
/// boxes, 101-point interpolated: the mean over r ∈ {0, 0.01, …, 1} of the
/// best precision reached at any recall ≥ r (0 where none is).
pub fn average_precision_ranked(ranked_tp: &[bool], n_gt: usize) -> Result<f64> {
    if n_gt == 0 {
        return Err(Error::Empty("ground truth (recall undefined)"));
    }
    // envelope[k] = max precision with recall ≥ k/100, compared in integers
    let mut envelope = [0.0f64; RECALL_POINTS];
    let mut tp = 0usize;
    for (rank, &hit) in ranked_tp.iter().enumerate() {
        if hit {
            tp += 1;
        }
        let precision = tp as f64 / (rank + 1) as f64;
        let reach = (tp * 100 / n_gt).min(100);
        for e in envelope.iter_mut().take(reach + 1) {
            if precision > *e {
                *e = precision;
            }
        }
    }
    Ok(envelope.iter().sum::<f64>() / RECALL_POINTS as f64)
}

/// AP over a test set: each image is matched at `iou_thresh`, then all
/// detections are pooled and ranked by confidence (ties keep image order,
/// then input order).
pub fn average_precision(images: &[ImageDetections], iou_thresh: f64) -> Result<f64> {
    let n_gt: usize = images.iter().map(|i| i.ground_truth.len()).sum();
    let mut pooled: Vec<(f64, bool)> = Vec::new();
    for img in images {
        let m = match_detections(&img.detections, &img.ground_truth, iou_thresh);
        for i in confidence_order(&img.detections) {
            pooled.push((img.detections[i].confidence, m.is_tp[i]));
        }
    }
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));
    let ranked: Vec<bool> = pooled.into_iter().map(|(_, tp)| tp).collect();
    average_precision_ranked(&ranked, n_gt)
}

/// IoU thresholds 0.50, 0.55, …, 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

/// `(AP at 0.5, mean AP over `thresholds`)`.
pub fn map_range(images: &[ImageDetections], thresholds: &[f64]) -> Result<(f64, f64)> {
    if thresholds.is_empty() {
        return Err(Error::Empty("IoU threshold list"));
    }
    let map50 = average_precision(images, 0.5)?;
    let mut sum = 0.0;
    for &t in thresholds {
        sum += average_precision(images, t)?;
    }
    Ok((map50, sum / thresholds.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{BoundingBox, Detection};

    #[test]
    fn ranked_examples() {
        assert_eq!(average_precision_ranked(&[true], 1).unwrap(), 1.0);
        assert_eq!(average_precision_ranked(&[], 3).unwrap(), 0.0);
        let ap = average_precision_ranked(&[true, false, true], 2).unwrap();
        assert!((ap - 253.0 / 303.0).abs() < 1e-12);
        assert!(average_precision_ranked(&[true], 0).is_err());
    }

    #[test]
    fn iou_sweep_example() {
        let gt = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let d = Detection::new(BoundingBox::new(0.0, 0.0, 10.0, 6.0).unwrap(), 0.9).unwrap();
        let imgs: Vec<ImageDetections> = (0..3)
            .map(|i| ImageDetections {
                frame_id: format!("f{i}"),
                detections: vec![d],
                ground_truth: vec![gt],
            })
            .collect();
        let (m50, m5095) = map_range(&imgs, &coco_thresholds()).unwrap();
        assert_eq!(m50, 1.0);
        assert!((m5095 - 0.3).abs() < 1e-12);
    }
}
