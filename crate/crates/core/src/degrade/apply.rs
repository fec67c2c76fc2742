use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Artifact, DegradationSpec};
use crate::error::Result;
use crate::imaging::{ImageTensor, CHANNELS};

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Applies one artifact to a [0, 1] display-scale image.
///
/// All sampling uses replicate padding at the borders. Output has the
/// input's shape and stays inside [0, 1] when the input does.
pub fn apply_artifact(img: &ImageTensor, spec: &DegradationSpec) -> Result<ImageTensor> {
    spec.validate()?;
    match spec.artifact {
        Artifact::GhostColor {
            red_dx,
            red_dy,
            blue_dx,
            blue_dy,
        } => Ok(ghost_color(img, (red_dx, red_dy), (blue_dx, blue_dy))),
        Artifact::Interlacing { displacement } => Ok(interlace(img, displacement)),
        Artifact::MotionBlur { length, angle } => Ok(motion_blur(img, length, angle)),
        Artifact::LowIllumination { gain, gamma } => {
            img.map(|v| (gain * (v as f64).max(0.0).powf(gamma)).clamp(0.0, 1.0) as f32)
        }
        Artifact::OcclusionBlobs { count } => Ok(occlusion_blobs(img, count, spec.seed)),
    }
}

/// Applies `specs` left to right.
pub fn compose(img: &ImageTensor, specs: &[DegradationSpec]) -> Result<ImageTensor> {
    specs.iter().try_fold(img.clone(), |acc, s| apply_artifact(&acc, s))
}

fn rebuild(img: &ImageTensor, f: impl Fn(usize, usize, usize) -> f32) -> ImageTensor {
    ImageTensor::from_fn(img.height(), img.width(), f).expect("shape preserved")
}

fn ghost_color(img: &ImageTensor, red: (i32, i32), blue: (i32, i32)) -> ImageTensor {
    let (h, w) = (img.height(), img.width());
    rebuild(img, |y, x, c| {
        let (dx, dy) = match c {
            0 => red,
            2 => blue,
            _ => return img.get(y, x, c),
        };
        let sy = clamp_index(y as isize - dy as isize, h);
        let sx = clamp_index(x as isize - dx as isize, w);
        img.get(sy, sx, c)
    })
}

fn interlace(img: &ImageTensor, d: i32) -> ImageTensor {
    let w = img.width();
    rebuild(img, |y, x, c| {
        if y % 2 == 1 {
            img.get(y, clamp_index(x as isize - d as isize, w), c)
        } else {
            img.get(y, x, c)
        }
    })
}

/// Integer tap offsets `(dx, dy)` of the line kernel, one per tap.
pub fn line_kernel_taps(length: u32, angle: f64) -> Vec<(isize, isize)> {
    let half = (length as isize - 1) / 2;
    let (s, c) = angle.sin_cos();
    (-half..=half)
        .map(|t| ((t as f64 * c).round() as isize, (t as f64 * s).round() as isize))
        .collect()
}

fn motion_blur(img: &ImageTensor, length: u32, angle: f64) -> ImageTensor {
    if length == 1 {
        return img.clone();
    }
    let (h, w) = (img.height(), img.width());
    let taps = line_kernel_taps(length, angle);
    let weight = 1.0 / taps.len() as f64;
    // f64 accumulation keeps constant images exactly constant after rounding.
    rebuild(img, |y, x, c| {
        let acc: f64 = taps
            .iter()
            .map(|&(dx, dy)| {
                let sy = clamp_index(y as isize + dy, h);
                let sx = clamp_index(x as isize + dx, w);
                img.get(sy, sx, c) as f64 * weight
            })
            .sum();
        acc as f32
    })
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    cx: f64,
    cy: f64,
    semi_major: f64,
    semi_minor: f64,
    rotation: f64,
    color: [f64; 3],
    opacity: f64,
}

fn sample_blobs(count: u32, h: usize, w: usize, seed: u64) -> Vec<Blob> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = h.min(w) as f64;
    (0..count)
        .map(|_| {
            let semi_major = (side * rng.gen_range(0.06..0.16)).max(1.5);
            let shade: f64 = rng.gen_range(0.75..1.15);
            let base = [0.42f64, 0.27, 0.12];
            let mut color = [0.0; 3];
            for (c, b) in color.iter_mut().zip(base) {
                *c = (b * shade + rng.gen_range(-0.03..0.03)).clamp(0.0, 1.0);
            }
            Blob {
                cx: rng.gen_range(0.0..w as f64),
                cy: rng.gen_range(0.0..h as f64),
                semi_major,
                semi_minor: semi_major * rng.gen_range(0.5..1.0),
                rotation: rng.gen_range(0.0..PI),
                color,
                opacity: rng.gen_range(0.8..0.95),
            }
        })
        .collect()
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn occlusion_blobs(img: &ImageTensor, count: u32, seed: u64) -> ImageTensor {
    if count == 0 {
        return img.clone();
    }
    let (h, w) = (img.height(), img.width());
    let blobs = sample_blobs(count, h, w, seed);
    let mut data: Vec<f32> = img.data().to_vec();
    for b in &blobs {
        let (s, c) = b.rotation.sin_cos();
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5 - b.cx, y as f64 + 0.5 - b.cy);
                let u = (px * c + py * s) / b.semi_major;
                let v = (-px * s + py * c) / b.semi_minor;
                let r = (u * u + v * v).sqrt();
                let alpha = b.opacity * (1.0 - smoothstep(0.75, 1.25, r));
                if alpha <= 0.0 {
                    continue;
                }
                let px = &mut data[(y * w + x) * CHANNELS..(y * w + x + 1) * CHANNELS];
                for (v, col) in px.iter_mut().zip(b.color) {
                    *v = ((1.0 - alpha) * *v as f64 + alpha * col).clamp(0.0, 1.0) as f32;
                }
            }
        }
    }
    ImageTensor::new(h, w, data).expect("shape preserved")
}
