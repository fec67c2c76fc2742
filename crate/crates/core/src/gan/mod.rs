//! Two-generator, two-discriminator unpaired translator.
//!
//! Domain A holds artifact-degraded frames, domain B clean ones. G_AB maps
//! A → B and is the restoration model; G_BA maps back for the cycle term.

mod checkpoint;
mod config;
mod losses;
mod model;
mod networks;
mod pool;
mod train;
mod translate;

pub use checkpoint::{
    epoch_dir, latest_checkpoint, read_blob, write_blob, CheckpointManifest, LossMeans, PoolState, CHECKPOINT_MANIFEST,
};
pub use config::{config_hash, DiscriminatorConfig, GeneratorConfig, LossWeights, PoolConfig, TrainConfig};
pub use losses::{
    adversarial_loss_discriminator, adversarial_loss_generator, cycle_loss, identity_loss, total_generator_objective,
    GeneratorLossParts,
};
pub use model::{CycleGan, Domain, GeneratorGradients};
pub use networks::{
    build_discriminator, build_generator, check_discriminator_input, check_generator_input, discriminator_forward,
    generator_forward,
};
pub use pool::{ImagePool, RngState};
pub use train::{LossRecord, Trainer};
pub use translate::{translate_images, TranslationTiming};
