use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in absolute pixel corner coordinates.
///
/// Serialized as `[x_min, y_min, x_max, y_max]`. Deserialization does not
/// reject degenerate boxes so that manifest validation can report them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for BoundingBox {
    fn from(v: [f64; 4]) -> Self {
        Self {
            x_min: v[0],
            y_min: v[1],
            x_max: v[2],
            y_max: v[3],
        }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if b.is_degenerate() {
            return Err(Error::Validation(format!("degenerate box {:?}", <[f64; 4]>::from(b))));
        }
        Ok(b)
    }

    /// Converts a normalized center-format box (`cx, cy, w, h` in [0, 1])
    /// to absolute corners, clipped to the image.
    pub fn from_normalized_center(cx: f64, cy: f64, w: f64, h: f64, img_w: usize, img_h: usize) -> Result<Self> {
        let (iw, ih) = (img_w as f64, img_h as f64);
        Self::new(
            (cx - w / 2.0) * iw,
            (cy - h / 2.0) * ih,
            (cx + w / 2.0) * iw,
            (cy + h / 2.0) * ih,
        )?
        .clipped(img_w, img_h)
    }

    pub fn is_degenerate(&self) -> bool {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite());
        !finite || self.x_min >= self.x_max || self.y_min >= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Clips to `[0, width] × [0, height]`; errors if nothing remains.
    pub fn clipped(&self, width: usize, height: usize) -> Result<Self> {
        Self::new(
            self.x_min.clamp(0.0, width as f64),
            self.y_min.clamp(0.0, height as f64),
            self.x_max.clamp(0.0, width as f64),
            self.y_max.clamp(0.0, height as f64),
        )
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.x_min <= other.x_min && self.y_min <= other.y_min && self.x_max >= other.x_max && self.y_max >= other.y_max
    }
}

/// A scored box emitted by a detector. Single class: 0 = polyp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub class_id: u32,
}

impl Detection {
    pub fn new(bbox: BoundingBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Validation(format!("confidence {confidence} outside [0, 1]")));
        }
        if bbox.is_degenerate() {
            return Err(Error::Validation("detection box is degenerate".into()));
        }
        Ok(Self {
            bbox,
            confidence,
            class_id: 0,
        })
    }
}
