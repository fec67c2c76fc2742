use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// Residual encoder–decoder generator: 7×7 stem, two stride-2
/// downsamplings, `n_res_blocks` residual blocks, two transposed-conv
/// upsamplings, 7×7 head with tanh. Instance norm and reflection padding
/// throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub base_width: usize,
    pub n_res_blocks: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::for_resolution(128)
    }
}

impl GeneratorConfig {
    /// 6 residual blocks up to 128 px, 9 above.
    pub fn for_resolution(size: usize) -> Self {
        Self {
            base_width: 64,
            n_res_blocks: if size <= 128 { 6 } else { 9 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_width == 0 {
            return Err(Error::param("base_width", "must be ≥ 1"));
        }
        if self.n_res_blocks == 0 {
            return Err(Error::param("n_res_blocks", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// Patch discriminator: 4×4 convolutions, `n_layers` of them with stride 2
/// (channel width doubling up to 8× base), then two stride-1 layers ending
/// in a single-channel score map. `n_layers = 3` is the 70-pixel patch
/// variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub base_width: usize,
    pub n_layers: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            base_width: 64,
            n_layers: 3,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_width == 0 {
            return Err(Error::param("base_width", "must be ≥ 1"));
        }
        if self.n_layers == 0 {
            return Err(Error::param("n_layers", "must be ≥ 1"));
        }
        Ok(())
    }

    /// Receptive field of one score-map element, in input pixels.
    pub fn receptive_field(&self) -> usize {
        // two stride-1 4×4 layers, then n_layers stride-2 4×4 layers
        let mut rf = 1;
        rf += 3;
        rf += 3;
        for _ in 0..self.n_layers {
            rf = (rf - 1) * 2 + 4;
        }
        rf
    }

    /// Score-map side length for a square input side, if non-empty.
    pub fn score_map_len(&self, input: usize) -> Option<usize> {
        let mut s = input;
        for _ in 0..self.n_layers {
            s = (s + 2).checked_sub(4)? / 2 + 1;
        }
        for _ in 0..2 {
            s = (s + 2).checked_sub(4)? + 1;
        }
        (s > 0).then_some(s)
    }
}

/// Weights of the composite generator objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_adv: f64,
    pub lambda_cyc: f64,
    pub lambda_idt: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_adv: 1.0,
            lambda_cyc: 10.0,
            lambda_idt: 5.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("lambda_adv", self.lambda_adv),
            ("lambda_cyc", self.lambda_cyc),
            ("lambda_idt", self.lambda_idt),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::param(field, format!("must be a finite value ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolConfig {
    /// 0 disables the pool: discriminators then see the latest fakes.
    pub capacity: usize,
    pub swap_probability: f64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            capacity: 50,
            swap_probability: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub weights: LossWeights,
    pub adam: AdamConfig,
    pub pool: PoolConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Square side length images are expected at.
    pub image_size: usize,
    pub init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
            pool: PoolConfig::default(),
            epochs: 200,
            batch_size: 1,
            image_size: 128,
            init_std: 0.02,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.weights.validate()?;
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be ≥ 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.pool.swap_probability) {
            return Err(Error::param("swap_probability", "must lie in [0, 1]"));
        }
        if !(self.adam.lr >= 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::param("lr", "must be finite and ≥ 0"));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(Error::param("init_std", "must be finite and > 0"));
        }
        if self.image_size % 4 != 0 || self.image_size == 0 {
            return Err(Error::param("image_size", "must be a positive multiple of 4"));
        }
        if self.discriminator.score_map_len(self.image_size).is_none() {
            return Err(Error::param("image_size", "too small for the discriminator"));
        }
        Ok(())
    }

    /// Learning-rate multiplier for a 0-based epoch: 1 for the first half,
    /// then linear decay toward 0 over the second half.
    pub fn lr_scale(&self, epoch: usize) -> f64 {
        let hold = self.epochs.div_ceil(2);
        if epoch < hold {
            1.0
        } else {
            let decay = (self.epochs - hold) as f64;
            1.0 - (epoch + 1 - hold) as f64 / (decay + 1.0)
        }
    }
}

/// SHA-256 of the canonical JSON of `value` (object keys sorted), so the
/// hash ignores key order in the source file.
pub fn config_hash<S: Serialize>(value: &S) -> String {
    let v = serde_json::to_value(value).expect("config serializes");
    let canonical = serde_json::to_string(&v).expect("value serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_map_arithmetic() {
        let d = DiscriminatorConfig::default();
        assert_eq!(d.receptive_field(), 70);
        assert_eq!(d.score_map_len(256), Some(30));
        assert_eq!(d.score_map_len(128), Some(14));
        assert_eq!(d.score_map_len(70), Some(6));
        assert_eq!(d.score_map_len(16), None);
        let micro = DiscriminatorConfig { base_width: 4, n_layers: 1 };
        assert_eq!(micro.score_map_len(8), Some(2));
    }

    #[test]
    fn resolution_keyed_depth() {
        assert_eq!(GeneratorConfig::for_resolution(64).n_res_blocks, 6);
        assert_eq!(GeneratorConfig::for_resolution(128).n_res_blocks, 6);
        assert_eq!(GeneratorConfig::for_resolution(256).n_res_blocks, 9);
    }

    #[test]
    fn lr_schedule_holds_then_decays() {
        let cfg = TrainConfig { epochs: 30, ..Default::default() };
        assert_eq!(cfg.lr_scale(0), 1.0);
        assert_eq!(cfg.lr_scale(14), 1.0);
        assert!((cfg.lr_scale(15) - 15.0 / 16.0).abs() < 1e-12);
        assert!((cfg.lr_scale(29) - 1.0 / 16.0).abs() < 1e-12);
        let one = TrainConfig { epochs: 1, ..Default::default() };
        assert_eq!(one.lr_scale(0), 1.0);
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"x":1,"y":{"b":2,"a":3}}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"y":{"a":3,"b":2},"x":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&serde_json::json!({"x": 2})));
    }

    #[test]
    fn validation_names_fields() {
        let mut w = LossWeights::default();
        w.lambda_cyc = -1.0;
        assert!(matches!(w.validate(), Err(Error::Parameter { field: "lambda_cyc", .. })));
        let cfg = TrainConfig { image_size: 66, ..Default::default() };
        assert!(cfg.validate().is_err());
        TrainConfig::default().validate().unwrap();
    }
}
