use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PoolConfig;
use crate::nn::{Real, Tensor};

/// Replay buffer of previously generated images fed to the discriminators.
///
/// Below capacity every queried image is stored and returned as is. At
/// capacity each image is, with probability `swap_probability`, exchanged
/// for a uniformly chosen stored one (the stored slot takes the new image);
/// otherwise it passes through. Capacity 0 disables the pool.
#[derive(Debug, Clone)]
pub struct ImagePool<T> {
    config: PoolConfig,
    images: Vec<Tensor<T>>,
    rng: ChaCha8Rng,
}

/// Serializable position of the pool's generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// Decimal string: JSON numbers cannot carry a u128 losslessly.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Option<ChaCha8Rng> {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse().ok()?);
        Some(rng)
    }
}

impl<T: Real> ImagePool<T> {
    pub fn new(config: PoolConfig, seed: u64) -> Self {
        Self {
            config,
            images: Vec::with_capacity(config.capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn from_parts(config: PoolConfig, images: Vec<Tensor<T>>, rng: ChaCha8Rng) -> Self {
        Self { config, images, rng }
    }

    pub fn config(&self) -> PoolConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn stored(&self) -> &[Tensor<T>] {
        &self.images
    }

    pub fn rng_state(&self) -> RngState {
        RngState::capture(&self.rng)
    }

    /// Returns a batch of the same size and shape as `batch`.
    pub fn query(&mut self, batch: &Tensor<T>) -> Tensor<T> {
        if self.config.capacity == 0 {
            return batch.clone();
        }
        let mut out = Vec::with_capacity(batch.n);
        for i in 0..batch.n {
            let img = batch.slice_sample(i);
            if self.images.len() < self.config.capacity {
                self.images.push(img.clone());
                out.push(img);
            } else if self.rng.gen::<f64>() < self.config.swap_probability {
                let j = self.rng.gen_range(0..self.images.len());
                out.push(std::mem::replace(&mut self.images[j], img));
            } else {
                out.push(img);
            }
        }
        Tensor::stack(&out)
    }
}
