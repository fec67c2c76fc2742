use std::time::{Duration, Instant};

use serde::Serialize;

use super::networks::generator_forward;
use crate::error::Result;
use crate::imaging::ImageTensor;
use crate::nn::{Network, Real};

/// Wall-clock accounting of a translation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TranslationTiming {
    pub images: usize,
    pub compute_secs: f64,
    pub io_secs: f64,
    /// Images per second of compute; absent when nothing was translated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
}

impl TranslationTiming {
    pub fn new(images: usize, compute: Duration, io: Duration) -> Self {
        let compute_secs = compute.as_secs_f64();
        let fps = (images > 0 && compute_secs > 0.0).then(|| images as f64 / compute_secs);
        Self {
            images,
            compute_secs,
            io_secs: io.as_secs_f64(),
            fps,
        }
    }
}

/// Runs a generator over [0, 1] images one at a time; outputs are in [0, 1].
pub fn translate_images<T: Real>(net: &Network<T>, images: &[ImageTensor]) -> Result<(Vec<ImageTensor>, Duration)> {
    let start = Instant::now();
    let mut out = Vec::with_capacity(images.len());
    for img in images {
        let x = img.from_unit().to_tensor::<T>();
        let y = generator_forward(net, &x)?;
        out.push(ImageTensor::from_tensor(&y, 0)?.to_unit());
    }
    Ok((out, start.elapsed()))
}
