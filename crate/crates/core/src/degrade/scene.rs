//! Synthetic endoscopy-like scenes with elliptical "polyps" and exact
//! ground-truth boxes, used for closed-loop tests of the whole toolkit.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{derive_seed, file_stem};
use crate::error::Result;
use crate::imaging::{unit_to_raster, BoundingBox, DatasetManifest, FrameRecord, ImageTensor, Quality};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub rotation: f64,
}

impl Ellipse {
    /// Normalized radius of a point: < 1 inside.
    pub fn radius_at(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * c + dy * s) / self.semi_x;
        let v = (-dx * s + dy * c) / self.semi_y;
        (u * u + v * v).sqrt()
    }

    /// Tight axis-aligned box of the continuous ellipse.
    pub fn bounding_box(&self) -> BoundingBox {
        let (s, c) = self.rotation.sin_cos();
        let ex = ((self.semi_x * c).powi(2) + (self.semi_y * s).powi(2)).sqrt();
        let ey = ((self.semi_x * s).powi(2) + (self.semi_y * c).powi(2)).sqrt();
        BoundingBox {
            x_min: self.cx - ex,
            y_min: self.cy - ey,
            x_max: self.cx + ex,
            y_max: self.cy + ey,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub size: usize,
    pub min_polyps: usize,
    pub max_polyps: usize,
    /// Semi-axis range in pixels.
    pub polyp_radius: (f64, f64),
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            size: 64,
            min_polyps: 1,
            max_polyps: 2,
            polyp_radius: (5.0, 10.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub image: ImageTensor,
    pub polyps: Vec<Ellipse>,
    pub boxes: Vec<BoundingBox>,
}

/// Renders one scene on the [0, 1] scale.
///
/// Tissue is a reddish, vignetted, low-frequency texture whose green channel
/// stays below 0.45; polyps are pale with green above 0.7, so the green
/// channel separates them cleanly.
pub fn render_scene(cfg: &SceneConfig, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.size;
    let size = n as f64;
    let tint = [rng.gen_range(0.72..0.86), rng.gen_range(0.30..0.38), rng.gen_range(0.24..0.32)];
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let ang = rng.gen_range(0.0..PI);
            let freq = rng.gen_range(1.0..3.5) * 2.0 * PI / size;
            (freq * ang.cos(), freq * ang.sin(), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let light = (rng.gen_range(0.35..0.65) * size, rng.gen_range(0.35..0.65) * size);

    let count = rng.gen_range(cfg.min_polyps..=cfg.max_polyps);
    let mut polyps: Vec<Ellipse> = Vec::new();
    let mut attempts = 0;
    while polyps.len() < count && attempts < 200 {
        attempts += 1;
        let rx = rng.gen_range(cfg.polyp_radius.0..=cfg.polyp_radius.1);
        let ry = rng.gen_range(cfg.polyp_radius.0..=cfg.polyp_radius.1);
        let margin = rx.max(ry) + 2.0;
        if 2.0 * margin >= size {
            break;
        }
        let e = Ellipse {
            cx: rng.gen_range(margin..size - margin),
            cy: rng.gen_range(margin..size - margin),
            semi_x: rx,
            semi_y: ry,
            rotation: rng.gen_range(0.0..PI),
        };
        let far = polyps.iter().all(|p| {
            let d = ((p.cx - e.cx).powi(2) + (p.cy - e.cy).powi(2)).sqrt();
            d > p.semi_x.max(p.semi_y) + e.semi_x.max(e.semi_y) + 4.0
        });
        if far {
            polyps.push(e);
        }
    }
    let polyp_color: Vec<[f64; 3]> = polyps
        .iter()
        .map(|_| [rng.gen_range(0.88..0.98), rng.gen_range(0.76..0.86), rng.gen_range(0.58..0.70)])
        .collect();

    let image = ImageTensor::from_fn(n, n, |y, x, c| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let texture: f64 = waves.iter().map(|(fx, fy, ph)| (fx * px + fy * py + ph).sin()).sum::<f64>() / 3.0;
        let r2 = ((px - light.0).powi(2) + (py - light.1).powi(2)) / (size * size);
        let shade = (1.0 - 0.9 * r2).clamp(0.55, 1.0) * (0.9 + 0.1 * texture);
        let mut v = tint[c] * shade;
        for (e, col) in polyps.iter().zip(&polyp_color) {
            let r = e.radius_at(px, py);
            if r < 1.0 {
                // dome highlight toward the centre
                let dome = 0.92 + 0.08 * (1.0 - r * r);
                v = (col[c] * dome).min(1.0);
            }
        }
        v.clamp(0.0, 1.0) as f32
    })
    .expect("scene is finite");

    let boxes = polyps
        .iter()
        .filter_map(|e| e.bounding_box().clipped(n, n).ok())
        .collect();
    Scene { image, polyps, boxes }
}

/// Writes `n_scenes` scenes grouped `frames_per_patient` to a patient under
/// `out_dir/scenes/` and returns their manifest (all informative).
pub fn write_scene_set(
    out_dir: &Path,
    cfg: &SceneConfig,
    n_scenes: usize,
    frames_per_patient: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    let per = frames_per_patient.max(1);
    let mut records = Vec::with_capacity(n_scenes);
    for i in 0..n_scenes {
        let frame_id = format!("scene{i:04}");
        let patient_id = format!("patient{:03}", i / per);
        let scene = render_scene(cfg, derive_seed(seed, &frame_id));
        let rel = PathBuf::from("scenes").join(format!("{}.png", file_stem(&frame_id)));
        unit_to_raster(&scene.image).save_png(&out_dir.join(&rel))?;
        records.push(FrameRecord {
            frame_id,
            patient_id,
            quality: Quality::Informative,
            path: rel,
            gt_boxes: scene.boxes,
        });
    }
    let mut m = DatasetManifest::new("synthetic", records);
    m.seed_note = Some(format!("synthetic scenes, seed {seed}"));
    m.root = Some(out_dir.to_path_buf());
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyps_stand_out_in_green() {
        for seed in 0..20 {
            let s = render_scene(&SceneConfig::default(), seed);
            assert!(!s.polyps.is_empty());
            assert_eq!(s.boxes.len(), s.polyps.len());
            for y in 0..64 {
                for x in 0..64 {
                    let inside = s.polyps.iter().any(|e| e.radius_at(x as f64 + 0.5, y as f64 + 0.5) < 1.0);
                    let g = s.image.get(y, x, 1);
                    if inside {
                        assert!(g > 0.65, "seed {seed} ({x},{y}) g={g}");
                    } else {
                        assert!(g < 0.45, "seed {seed} ({x},{y}) g={g}");
                    }
                }
            }
        }
    }

    #[test]
    fn axis_aligned_ellipse_box() {
        let e = Ellipse {
            cx: 10.0,
            cy: 20.0,
            semi_x: 4.0,
            semi_y: 2.0,
            rotation: 0.0,
        };
        assert_eq!(<[f64; 4]>::from(e.bounding_box()), [6.0, 18.0, 14.0, 22.0]);
    }

    #[test]
    fn rendering_is_seeded() {
        let a = render_scene(&SceneConfig::default(), 4);
        let b = render_scene(&SceneConfig::default(), 4);
        assert_eq!(a.image, b.image);
        assert_ne!(a.image, render_scene(&SceneConfig::default(), 5).image);
    }
}
