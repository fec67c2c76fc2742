use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, Detection, ImageTensor, CHANNELS};

/// Thresholded connected-component detector for synthetic scenes.
///
/// Works on [0, 1] images. Pixels whose `channel` value exceeds `threshold`
/// are grouped by 4-connectivity; components smaller than `min_area` pixels
/// are dropped. Each survivor becomes a tight pixel-edge box whose
/// confidence is the mean channel value over the component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobDetector {
    pub channel: usize,
    pub threshold: f64,
    pub min_area: usize,
}

impl Default for BlobDetector {
    fn default() -> Self {
        Self {
            channel: 1,
            threshold: 0.55,
            min_area: 4,
        }
    }
}

/// Components of `mask` (row-major, `w` wide) as pixel index lists, in
/// order of their first pixel.
pub fn connected_components(mask: &[bool], w: usize) -> Vec<Vec<usize>> {
    let h = if w == 0 { 0 } else { mask.len() / w };
    let mut label = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] {
            continue;
        }
        let mut comp = Vec::new();
        label[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            comp.push(p);
            let (y, x) = (p / w, p % w);
            let mut visit = |q: usize| {
                if mask[q] && !label[q] {
                    label[q] = true;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

impl BlobDetector {
    pub fn validate(&self) -> Result<()> {
        if self.channel >= CHANNELS {
            return Err(Error::param("channel", format!("must be < {CHANNELS}")));
        }
        if !self.threshold.is_finite() {
            return Err(Error::param("threshold", "must be finite"));
        }
        Ok(())
    }

    pub fn detect(&self, img: &ImageTensor) -> Result<Vec<Detection>> {
        self.validate()?;
        let (h, w) = (img.height(), img.width());
        let value = |p: usize| img.data()[p * CHANNELS + self.channel] as f64;
        let mask: Vec<bool> = (0..h * w).map(|p| value(p) > self.threshold).collect();
        let mut dets = Vec::new();
        for comp in connected_components(&mask, w) {
            if comp.len() < self.min_area.max(1) {
                continue;
            }
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            let mut sum = 0.0;
            for &p in &comp {
                let (y, x) = (p / w, p % w);
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
                sum += value(p);
            }
            let bbox = BoundingBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64)?;
            let confidence = (sum / comp.len() as f64).clamp(0.0, 1.0);
            dets.push(Detection::new(bbox, confidence)?);
        }
        Ok(dets)
    }
}

/// [`BlobDetector`] with default channel and area filter.
pub fn toy_blob_detector(img: &ImageTensor, threshold: f64) -> Result<Vec<Detection>> {
    BlobDetector {
        threshold,
        ..Default::default()
    }
    .detect(img)
}
