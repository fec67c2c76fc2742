use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{unit_to_raster, BoundingBox, Detection, ImageTensor, CHANNELS};

/// Gap between panels, in pixels.
const GAP: usize = 2;

/// Copy of `img` with box outlines drawn in: ground truth in green,
/// detections in yellow.
pub fn overlay_boxes(img: &ImageTensor, gts: &[BoundingBox], dets: &[Detection]) -> ImageTensor {
    let (h, w) = (img.height(), img.width());
    let mut data = img.data().to_vec();
    let mut outline = |b: &BoundingBox, color: [f32; 3]| {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        let (x0, x1) = (clamp(b.x_min, w), clamp((b.x_max - 1.0).max(b.x_min), w));
        let (y0, y1) = (clamp(b.y_min, h), clamp((b.y_max - 1.0).max(b.y_min), h));
        let mut put = |y: usize, x: usize| data[(y * w + x) * CHANNELS..][..CHANNELS].copy_from_slice(&color);
        for x in x0..=x1 {
            put(y0, x);
            put(y1, x);
        }
        for y in y0..=y1 {
            put(y, x0);
            put(y, x1);
        }
    };
    for b in gts {
        outline(b, [0.1, 0.9, 0.2]);
    }
    for d in dets {
        outline(&d.bbox, [1.0, 0.9, 0.0]);
    }
    ImageTensor::new(h, w, data).expect("overlay stays finite")
}

/// Places equally sized [0, 1] panels left to right on a black background.
pub fn strip(panels: &[ImageTensor]) -> Result<ImageTensor> {
    let first = panels.first().ok_or(Error::Empty("strip panels"))?;
    let (h, pw) = (first.height(), first.width());
    if panels.iter().any(|p| !p.same_shape(first)) {
        return Err(Error::Shape("strip panels differ in size".into()));
    }
    let w = panels.len() * pw + (panels.len() - 1) * GAP;
    ImageTensor::from_fn(h, w, |y, x, c| {
        let (k, off) = (x / (pw + GAP), x % (pw + GAP));
        if off < pw {
            panels[k].get(y, off, c)
        } else {
            0.0
        }
    })
}

pub fn write_strip(path: &Path, panels: &[ImageTensor]) -> Result<()> {
    unit_to_raster(&strip(panels)?).save_png(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strip_layout() {
        let a = ImageTensor::filled(4, 3, 0.25);
        let b = ImageTensor::filled(4, 3, 0.75);
        let s = strip(&[a.clone(), b]).unwrap();
        assert_eq!((s.height(), s.width()), (4, 8));
        assert_eq!(s.get(0, 0, 0), 0.25);
        assert_eq!(s.get(0, 3, 0), 0.0);
        assert_eq!(s.get(3, 5, 2), 0.75);
        assert!(strip(&[a, ImageTensor::filled(2, 3, 0.0)]).is_err());
    }

    #[test]
    fn overlay_draws_outline_only() {
        let img = ImageTensor::filled(10, 10, 0.0);
        let b = BoundingBox::new(2.0, 2.0, 6.0, 6.0).unwrap();
        let o = overlay_boxes(&img, &[b], &[]);
        assert_eq!(o.get(2, 2, 1), 0.9);
        assert_eq!(o.get(5, 5, 1), 0.9);
        assert_eq!(o.get(3, 3, 1), 0.0);
        assert_eq!(o.get(6, 6, 1), 0.0);
    }
}
