use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

pub const CHANNELS: usize = 3;

/// 8-bit RGB raster, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("raster must be non-empty, got {height}x{width}")));
        }
        if data.len() != height * width * CHANNELS {
            return Err(Error::Shape(format!(
                "raster {height}x{width} needs {} bytes, got {}",
                height * width * CHANNELS,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::format(path, other),
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(h as usize, w as usize, rgb.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        image::save_buffer(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::format(path, other),
        })
    }
}

/// H×W×3 real-valued image, interleaved RGB.
///
/// The working range depends on the consumer: the translator uses [-1, 1],
/// the degradation simulator and the blob detector use [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("image must be non-empty, got {height}x{width}")));
        }
        if data.len() != height * width * CHANNELS {
            return Err(Error::Shape(format!(
                "image {height}x{width}x3 needs {} values, got {}",
                height * width * CHANNELS,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at index {i}")));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self::new(height, width, vec![value; height * width * CHANNELS]).expect("valid constant image")
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Applies `f` elementwise; the result must stay finite.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// [-1, 1] → [0, 1].
    pub fn to_unit(&self) -> Self {
        self.map(|v| ((v as f64 + 1.0) * 0.5) as f32).expect("finite")
    }

    /// [0, 1] → [-1, 1].
    pub fn from_unit(&self) -> Self {
        self.map(|v| (v as f64 * 2.0 - 1.0) as f32).expect("finite")
    }

    /// Single-sample NCHW tensor.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let (h, w) = (self.height, self.width);
        let mut data = vec![T::zero(); CHANNELS * h * w];
        for (i, px) in self.data.chunks_exact(CHANNELS).enumerate() {
            for c in 0..CHANNELS {
                data[c * h * w + i] = T::of(px[c] as f64);
            }
        }
        Tensor::from_vec(1, CHANNELS, h, w, data)
    }

    /// Sample `index` of a 3-channel NCHW tensor.
    pub fn from_tensor<T: Real>(t: &Tensor<T>, index: usize) -> Result<Self> {
        if t.c != CHANNELS {
            return Err(Error::Shape(format!("expected 3 channels, got {}", t.c)));
        }
        let plane = t.h * t.w;
        let s = t.sample(index);
        let mut data = Vec::with_capacity(plane * CHANNELS);
        for i in 0..plane {
            for c in 0..CHANNELS {
                data.push(s[c * plane + i].as_f64() as f32);
            }
        }
        Self::new(t.h, t.w, data)
    }
}

/// Maps 8-bit levels to the [-1, 1] working range: `2·(v/255) − 1`.
pub fn normalize(raster: &Raster) -> ImageTensor {
    let data = raster.data.iter().map(|&v| level_to_signed(v as f64) as f32).collect();
    ImageTensor::new(raster.height, raster.width, data).expect("raster shape is valid")
}

/// As [`normalize`], for real-valued level data that must lie in [0, 255].
pub fn normalize_levels(levels: &ImageTensor) -> Result<ImageTensor> {
    if let Some((i, v)) = levels.data().iter().enumerate().find(|(_, v)| !(0.0..=255.0).contains(*v)) {
        return Err(Error::Validation(format!("level {v} at index {i} outside [0, 255]")));
    }
    levels.map(|v| level_to_signed(v as f64) as f32)
}

#[inline]
fn level_to_signed(v: f64) -> f64 {
    2.0 * (v / 255.0) - 1.0
}

/// Maps [-1, 1] back to 8-bit levels, clipping first: `round(255·(v+1)/2)`.
pub fn denormalize(img: &ImageTensor) -> Raster {
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let v = (v as f64).clamp(-1.0, 1.0);
            (255.0 * (v + 1.0) / 2.0).round() as u8
        })
        .collect();
    Raster {
        height: img.height(),
        width: img.width(),
        data,
    }
}

/// [0, 1] display-scale image to 8-bit levels with clipping.
pub fn unit_to_raster(img: &ImageTensor) -> Raster {
    denormalize(&img.from_unit())
}

pub fn raster_to_unit(raster: &Raster) -> ImageTensor {
    normalize(raster).to_unit()
}

/// Peak signal-to-noise ratio in dB for [0, 1] images; infinite when equal.
pub fn psnr(reference: &ImageTensor, test: &ImageTensor) -> Result<f64> {
    if !reference.same_shape(test) {
        return Err(Error::Shape("psnr operands differ in shape".into()));
    }
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum::<f64>()
        / reference.data().len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(v: u8) -> Raster {
        Raster::new(1, 1, vec![v; 3]).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&single(0)).data()[0], -1.0);
        assert_eq!(normalize(&single(255)).data()[0], 1.0);
        let mid = normalize(&single(128)).data()[0] as f64;
        assert!((mid - 1.0 / 255.0).abs() < 1e-7);
    }

    #[test]
    fn denormalize_examples() {
        let img = ImageTensor::new(1, 1, vec![-1.0, 1.0, 0.0]).unwrap();
        assert_eq!(denormalize(&img).data, vec![0, 255, 128]);
    }

    #[test]
    fn denormalize_clips_overshoot() {
        let img = ImageTensor::new(1, 1, vec![-1.5, 1.0001, 7.0]).unwrap();
        assert_eq!(denormalize(&img).data, vec![0, 255, 255]);
    }

    #[test]
    fn normalize_levels_rejects_out_of_range() {
        let img = ImageTensor::new(1, 1, vec![0.0, 256.0, 3.0]).unwrap();
        assert!(matches!(normalize_levels(&img), Err(Error::Validation(_))));
        let ok = ImageTensor::new(1, 1, vec![0.0, 255.0, 127.5]).unwrap();
        assert_eq!(normalize_levels(&ok).unwrap().data()[2], 0.0);
    }

    #[test]
    fn non_finite_and_empty_images_are_rejected() {
        assert!(ImageTensor::new(1, 1, vec![f32::NAN, 0.0, 0.0]).is_err());
        assert!(ImageTensor::new(0, 1, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![0; 5]).is_err());
    }

    #[test]
    fn tensor_layout_round_trip() {
        let img = ImageTensor::from_fn(2, 3, |y, x, c| (y * 100 + x * 10 + c) as f32).unwrap();
        let t = img.to_tensor::<f64>();
        assert_eq!(t.shape(), [1, 3, 2, 3]);
        // channel 1, y 1, x 2
        assert_eq!(t.data[6 + 3 + 2], 121.0);
        assert_eq!(ImageTensor::from_tensor(&t, 0).unwrap(), img);
    }

    #[test]
    fn psnr_of_identical_images_is_infinite() {
        let a = ImageTensor::filled(2, 2, 0.5);
        assert!(psnr(&a, &a).unwrap().is_infinite());
        let b = ImageTensor::filled(2, 2, 0.6);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(levels in proptest::collection::vec(any::<u8>(), 3..=48)) {
            let n = levels.len() / 3;
            let raster = Raster::new(1, n, levels[..n * 3].to_vec()).unwrap();
            prop_assert_eq!(denormalize(&normalize(&raster)), raster);
        }

        #[test]
        fn normalize_is_monotone(a in any::<u8>(), b in any::<u8>()) {
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(normalize(&single(lo)).data()[0] <= normalize(&single(hi)).data()[0]);
        }
    }
}
