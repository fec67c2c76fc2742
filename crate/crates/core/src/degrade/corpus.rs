use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{compose, Artifact, ArtifactKind, DegradationSpec};
use crate::error::{Error, Result};
use crate::imaging::{raster_to_unit, unit_to_raster, DatasetManifest, FrameRecord, Quality, Raster};

/// Stable 64-bit seed for one frame: leading bytes of SHA-256(seed ‖ id).
pub fn derive_seed(global_seed: u64, frame_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(frame_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Inclusive parameter ranges used by the random sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamRanges {
    pub max_ghost_shift: i32,
    pub max_interlace_shift: i32,
    pub blur_length: (u32, u32),
    pub gain: (f64, f64),
    pub gamma: (f64, f64),
    pub blob_count: (u32, u32),
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            max_ghost_shift: 3,
            max_interlace_shift: 3,
            blur_length: (3, 7),
            gain: (0.35, 0.7),
            gamma: (1.2, 2.0),
            blob_count: (1, 3),
        }
    }
}

/// Draws `min..=max` distinct artifact kinds uniformly without replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomSampler {
    pub kinds: Vec<ArtifactKind>,
    pub min_artifacts: usize,
    pub max_artifacts: usize,
    pub ranges: ParamRanges,
}

impl Default for RandomSampler {
    fn default() -> Self {
        Self {
            kinds: ArtifactKind::ALL.to_vec(),
            min_artifacts: 1,
            max_artifacts: 3,
            ranges: ParamRanges::default(),
        }
    }
}

/// Seeded distribution over artifact lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SpecSampler {
    Random(RandomSampler),
    /// The same list for every frame.
    Fixed { specs: Vec<DegradationSpec> },
}

impl Default for SpecSampler {
    fn default() -> Self {
        SpecSampler::Random(RandomSampler::default())
    }
}

impl SpecSampler {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpecSampler::Fixed { specs } => specs.iter().try_for_each(DegradationSpec::validate),
            SpecSampler::Random(r) => {
                if r.kinds.is_empty() {
                    return Err(Error::param("kinds", "at least one artifact kind is required"));
                }
                if r.min_artifacts > r.max_artifacts || r.max_artifacts > r.kinds.len() {
                    return Err(Error::param(
                        "max_artifacts",
                        format!("need min ≤ max ≤ {} kinds", r.kinds.len()),
                    ));
                }
                // the extreme corners of each range must be valid parameters
                let g = r.ranges;
                for spec in [
                    Artifact::GhostColor { red_dx: g.max_ghost_shift, red_dy: 0, blue_dx: 0, blue_dy: 0 },
                    Artifact::Interlacing { displacement: g.max_interlace_shift },
                    Artifact::MotionBlur { length: g.blur_length.0 | 1, angle: 0.0 },
                    Artifact::MotionBlur { length: g.blur_length.1 | 1, angle: 0.0 },
                    Artifact::LowIllumination { gain: g.gain.0, gamma: g.gamma.0 },
                    Artifact::LowIllumination { gain: g.gain.1, gamma: g.gamma.1 },
                    Artifact::OcclusionBlobs { count: g.blob_count.1 },
                ] {
                    spec.validate()?;
                }
                if g.blur_length.0 > g.blur_length.1 || g.gain.0 > g.gain.1 || g.gamma.0 > g.gamma.1 || g.blob_count.0 > g.blob_count.1 {
                    return Err(Error::param("ranges", "range lower bound exceeds upper bound"));
                }
                Ok(())
            }
        }
    }

    /// The artifact list for a frame, fully determined by `frame_seed`.
    pub fn sample(&self, frame_seed: u64) -> Vec<DegradationSpec> {
        match self {
            SpecSampler::Fixed { specs } => specs.clone(),
            SpecSampler::Random(r) => {
                let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
                let n = rng.gen_range(r.min_artifacts..=r.max_artifacts);
                let mut kinds = r.kinds.clone();
                kinds.shuffle(&mut rng);
                kinds.truncate(n);
                // canonical application order regardless of draw order
                kinds.sort();
                kinds
                    .into_iter()
                    .map(|k| DegradationSpec::new(sample_artifact(k, &r.ranges, &mut rng), rng.gen()))
                    .collect()
            }
        }
    }
}

fn sample_artifact(kind: ArtifactKind, r: &ParamRanges, rng: &mut ChaCha8Rng) -> Artifact {
    let mut shift = |m: i32| if m == 0 { 0 } else { rng.gen_range(-m..=m) };
    match kind {
        ArtifactKind::GhostColor => {
            let m = r.max_ghost_shift;
            Artifact::GhostColor {
                red_dx: shift(m),
                red_dy: shift(m),
                blue_dx: shift(m),
                blue_dy: shift(m),
            }
        }
        ArtifactKind::Interlacing => {
            let m = r.max_interlace_shift.max(1);
            let mut d = 0;
            while d == 0 {
                d = rng.gen_range(-m..=m);
            }
            Artifact::Interlacing { displacement: d }
        }
        ArtifactKind::MotionBlur => {
            let (lo, hi) = ((r.blur_length.0 | 1) / 2, (r.blur_length.1 | 1) / 2);
            Artifact::MotionBlur {
                length: 2 * rng.gen_range(lo..=hi) + 1,
                angle: rng.gen_range(0.0..PI),
            }
        }
        ArtifactKind::LowIllumination => Artifact::LowIllumination {
            gain: rng.gen_range(r.gain.0..=r.gain.1),
            gamma: rng.gen_range(r.gamma.0..=r.gamma.1),
        },
        ArtifactKind::OcclusionBlobs => Artifact::OcclusionBlobs {
            count: rng.gen_range(r.blob_count.0..=r.blob_count.1),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub clean_id: String,
    pub degraded_id: String,
}

#[derive(Debug, Clone)]
pub struct PairedCorpus {
    pub clean: DatasetManifest,
    pub degraded: DatasetManifest,
    pub pairs: Vec<Pair>,
    pub specs: BTreeMap<String, Vec<DegradationSpec>>,
}

pub const PAIRS_FILE: &str = "pairs.csv";
pub const CLEAN_MANIFEST: &str = "clean.json";
pub const DEGRADED_MANIFEST: &str = "degraded.json";
pub const SPECS_FILE: &str = "degradation_specs.json";

pub fn degraded_id(clean_id: &str) -> String {
    format!("{clean_id}_degraded")
}

/// File-name-safe rendering of a frame id.
pub(crate) fn file_stem(frame_id: &str) -> String {
    frame_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn write_pairs_csv(path: &Path, pairs: &[Pair]) -> Result<()> {
    let mut out = String::from("clean_id,degraded_id\n");
    for p in pairs {
        out.push_str(&format!("{},{}\n", p.clean_id, p.degraded_id));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_pairs_csv(path: &Path) -> Result<Vec<Pair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("clean_id,degraded_id") {
        return Err(Error::format(path, "missing `clean_id,degraded_id` header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| match l.split_once(',') {
            Some((c, d)) => Ok(Pair {
                clean_id: c.trim().to_string(),
                degraded_id: d.trim().to_string(),
            }),
            None => Err(Error::format(path, format!("malformed pair line `{l}`"))),
        })
        .collect()
}

/// Writes a self-contained paired corpus under `out_dir`:
/// `clean/`, `degraded/`, the two manifests, `pairs.csv` and the per-frame
/// artifact lists. Each frame's artifacts are drawn with
/// [`derive_seed`]`(seed, frame_id)`, so the output does not depend on
/// processing order.
pub fn build_paired_corpus(manifest: &DatasetManifest, sampler: &SpecSampler, out_dir: &Path, seed: u64) -> Result<PairedCorpus> {
    sampler.validate()?;
    let problems = crate::imaging::validate_manifest(manifest);
    if let Some(p) = problems.first() {
        return Err(Error::Validation(format!("{} problem(s) in input manifest, first: {p}", problems.len())));
    }
    for dir in ["clean", "degraded"] {
        let d = out_dir.join(dir);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let mut stems = HashSet::new();
    let mut clean_records = Vec::with_capacity(manifest.len());
    let mut degraded_records = Vec::with_capacity(manifest.len());
    let mut pairs = Vec::with_capacity(manifest.len());
    let mut specs_by_frame = BTreeMap::new();

    for rec in &manifest.records {
        let stem = file_stem(&rec.frame_id);
        if !stems.insert(stem.clone()) {
            return Err(Error::Validation(format!("frame ids collide on file name `{stem}`")));
        }
        let src = manifest.resolved_path(rec);
        let raster = Raster::load_png(&src)?;
        let clean_rel = PathBuf::from("clean").join(format!("{stem}.png"));
        raster.save_png(&out_dir.join(&clean_rel))?;

        let specs = sampler.sample(derive_seed(seed, &rec.frame_id));
        let degraded = compose(&raster_to_unit(&raster), &specs)?;
        let deg_id = degraded_id(&rec.frame_id);
        let deg_rel = PathBuf::from("degraded").join(format!("{stem}.png"));
        unit_to_raster(&degraded).save_png(&out_dir.join(&deg_rel))?;

        clean_records.push(FrameRecord {
            path: clean_rel,
            ..rec.clone()
        });
        degraded_records.push(FrameRecord {
            frame_id: deg_id.clone(),
            patient_id: rec.patient_id.clone(),
            quality: Quality::Uninformative,
            path: deg_rel,
            gt_boxes: rec.gt_boxes.clone(),
        });
        pairs.push(Pair {
            clean_id: rec.frame_id.clone(),
            degraded_id: deg_id.clone(),
        });
        specs_by_frame.insert(deg_id, specs);
    }

    let finish = |name: String, records| {
        let mut m = DatasetManifest::new(name, records);
        m.seed_note = Some(format!("degradation seed {seed}"));
        m.config_hash = manifest.config_hash.clone();
        m.root = Some(out_dir.to_path_buf());
        m
    };
    let clean = finish(format!("{}-clean", manifest.name), clean_records);
    let degraded = finish(format!("{}-degraded", manifest.name), degraded_records);
    clean.save(&out_dir.join(CLEAN_MANIFEST))?;
    degraded.save(&out_dir.join(DEGRADED_MANIFEST))?;
    write_pairs_csv(&out_dir.join(PAIRS_FILE), &pairs)?;
    let specs_path = out_dir.join(SPECS_FILE);
    std::fs::write(&specs_path, serde_json::to_string_pretty(&specs_by_frame).expect("specs serialize"))
        .map_err(|e| Error::io(&specs_path, e))?;

    Ok(PairedCorpus {
        clean,
        degraded,
        pairs,
        specs: specs_by_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_depends_on_both_inputs() {
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
    }

    #[test]
    fn random_sampler_draws_distinct_valid_kinds() {
        let s = SpecSampler::default();
        s.validate().unwrap();
        for seed in 0..200 {
            let specs = s.sample(seed);
            assert!((1..=3).contains(&specs.len()));
            let kinds: HashSet<_> = specs.iter().map(|s| s.kind()).collect();
            assert_eq!(kinds.len(), specs.len());
            for sp in &specs {
                sp.validate().unwrap();
            }
            assert_eq!(specs, s.sample(seed));
        }
    }

    #[test]
    fn invalid_sampler_is_rejected() {
        let mut r = RandomSampler::default();
        r.max_artifacts = 9;
        assert!(SpecSampler::Random(r).validate().is_err());
        let mut r = RandomSampler::default();
        r.ranges.gain = (0.0, 0.5);
        assert!(SpecSampler::Random(r).validate().is_err());
    }

    #[test]
    fn sampler_json_forms() {
        let fixed: SpecSampler = serde_json::from_str(
            r#"{"mode":"fixed","specs":[{"kind":"MotionBlur","params":{"length":1,"angle":0.0},"seed":0}]}"#,
        )
        .unwrap();
        assert!(matches!(fixed, SpecSampler::Fixed { ref specs } if specs.len() == 1));
        let random: SpecSampler = serde_json::from_str(r#"{"mode":"random","max_artifacts":2}"#).unwrap();
        assert!(matches!(random, SpecSampler::Random(ref r) if r.max_artifacts == 2 && r.min_artifacts == 1));
    }

    #[test]
    fn pairs_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.csv");
        let pairs = vec![Pair {
            clean_id: "a".into(),
            degraded_id: "a_degraded".into(),
        }];
        write_pairs_csv(&p, &pairs).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("clean_id,degraded_id\n"));
        assert_eq!(read_pairs_csv(&p).unwrap(), pairs);
    }
}
