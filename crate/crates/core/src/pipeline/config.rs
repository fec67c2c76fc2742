use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::degrade::scene::SceneConfig;
use crate::degrade::SpecSampler;
use crate::error::{Error, Result};
use crate::gan::{config_hash, DiscriminatorConfig, GeneratorConfig, TrainConfig};
use crate::imaging::SplitRatios;
use crate::metrics::{BlobDetector, EvalConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Evaluate on the frames as they are.
    #[default]
    Raw,
    /// Replace every uninformative frame with its translation first.
    Translated,
}

/// Input locations. Relative paths resolve against the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataPaths {
    /// Dataset manifest consumed by `degrade`, `split`, `train`,
    /// `translate` and `detect-eval`.
    pub manifest: Option<PathBuf>,
    /// Checkpoint directory, or a directory of `epoch_NNNN` checkpoints.
    pub checkpoint: Option<PathBuf>,
    /// Detection file to score instead of running the toy detector.
    pub detections: Option<PathBuf>,
    /// The two reports compared by `report`.
    pub raw_report: Option<PathBuf>,
    pub translated_report: Option<PathBuf>,
}

/// Synthetic data for `e2e-synthetic`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub scenes: usize,
    pub frames_per_patient: usize,
    pub scene: SceneConfig,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            scenes: 200,
            frames_per_patient: 4,
            scene: SceneConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_root: PathBuf,
    pub data: DataPaths,
    pub split: SplitRatios,
    pub degradation: SpecSampler,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub detector: BlobDetector,
    pub scenario: Scenario,
    pub synthetic: SyntheticConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_root: PathBuf::from("framerestore-out"),
            data: DataPaths::default(),
            split: SplitRatios::default(),
            degradation: SpecSampler::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            detector: BlobDetector::default(),
            scenario: Scenario::Raw,
            synthetic: SyntheticConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Small-network settings sized for 64×64 synthetic scenes on a CPU.
    pub fn synthetic_default() -> Self {
        Self {
            train: TrainConfig {
                generator: GeneratorConfig {
                    base_width: 8,
                    n_res_blocks: 2,
                },
                discriminator: DiscriminatorConfig {
                    base_width: 8,
                    n_layers: 2,
                },
                image_size: 64,
                epochs: 30,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    /// Parses YAML (a superset of JSON, so JSON configs load too).
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_str_over(text, &Self::default())
    }

    /// Parses `text` as overrides on top of `base`: nested mappings merge
    /// key by key, anything else replaces the base value.
    pub fn from_str_over(text: &str, base: &Self) -> Result<Self> {
        let patch: serde_json::Value = serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = serde_json::to_value(base).expect("config serializes");
        if !patch.is_null() {
            merge(&mut merged, patch);
        }
        let cfg: Self = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_over(path, &Self::default())
    }

    /// [`load`](Self::load) with unspecified keys taken from `base`.
    pub fn load_over(path: &Path, base: &Self) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_str_over(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_root);
        for p in [
            &mut cfg.data.manifest,
            &mut cfg.data.checkpoint,
            &mut cfg.data.detections,
            &mut cfg.data.raw_report,
            &mut cfg.data.translated_report,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.degradation.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        self.detector.validate()?;
        if self.synthetic.scenes == 0 {
            return Err(Error::param("scenes", "must be ≥ 1"));
        }
        Ok(())
    }

    /// Extra check for `e2e-synthetic`: rendered scenes must have the
    /// training resolution.
    pub fn validate_synthetic(&self) -> Result<()> {
        self.validate()?;
        if self.synthetic.scene.size != self.train.image_size {
            return Err(Error::param(
                "image_size",
                format!(
                    "synthetic scenes are {} px but training expects {} px",
                    self.synthetic.scene.size, self.train.image_size
                ),
            ));
        }
        Ok(())
    }

    /// Hash of everything that shapes artifacts. Output and input locations
    /// are excluded so moving a run does not invalidate it, and so is the
    /// scenario, since raw and translated evaluations share one trained model.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_root");
            obj.remove("data");
            obj.remove("scenario");
        }
        config_hash(&v)
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
