use rand::Rng;

use super::{DiscriminatorConfig, GeneratorConfig};
use crate::error::{Error, Result};
use crate::nn::{Layer, NetBuilder, Network, Real, Tensor};

pub fn build_generator<T: Real, R: Rng>(cfg: &GeneratorConfig, rng: &mut R, init_std: f64) -> Network<T> {
    let w = cfg.base_width;
    // Biases ahead of instance norm would be cancelled by it, so only the
    // output convolution carries one.
    let mut b = NetBuilder::new()
        .layer(Layer::ReflectionPad(3))
        .conv(3, w, 7, 1, 0, false)
        .layer(Layer::InstanceNorm)
        .layer(Layer::Relu)
        .conv(w, 2 * w, 3, 2, 1, false)
        .layer(Layer::InstanceNorm)
        .layer(Layer::Relu)
        .conv(2 * w, 4 * w, 3, 2, 1, false)
        .layer(Layer::InstanceNorm)
        .layer(Layer::Relu);
    for _ in 0..cfg.n_res_blocks {
        b = b.residual(|r| {
            r.layer(Layer::ReflectionPad(1))
                .conv(4 * w, 4 * w, 3, 1, 0, false)
                .layer(Layer::InstanceNorm)
                .layer(Layer::Relu)
                .layer(Layer::ReflectionPad(1))
                .conv(4 * w, 4 * w, 3, 1, 0, false)
                .layer(Layer::InstanceNorm)
        });
    }
    b.conv_transpose(4 * w, 2 * w, 3, 2, 1, 1, false)
        .layer(Layer::InstanceNorm)
        .layer(Layer::Relu)
        .conv_transpose(2 * w, w, 3, 2, 1, 1, false)
        .layer(Layer::InstanceNorm)
        .layer(Layer::Relu)
        .layer(Layer::ReflectionPad(3))
        .conv(w, 3, 7, 1, 0, true)
        .layer(Layer::Tanh)
        .build(rng, init_std)
}

pub fn build_discriminator<T: Real, R: Rng>(cfg: &DiscriminatorConfig, rng: &mut R, init_std: f64) -> Network<T> {
    let w = cfg.base_width;
    let mut b = NetBuilder::new().conv(3, w, 4, 2, 1, true).layer(Layer::LeakyRelu(0.2));
    let mut width = w;
    for i in 1..cfg.n_layers {
        let next = w * (1 << i.min(3));
        b = b
            .conv(width, next, 4, 2, 1, false)
            .layer(Layer::InstanceNorm)
            .layer(Layer::LeakyRelu(0.2));
        width = next;
    }
    let next = w * (1 << cfg.n_layers.min(3));
    b.conv(width, next, 4, 1, 1, false)
        .layer(Layer::InstanceNorm)
        .layer(Layer::LeakyRelu(0.2))
        .conv(next, 1, 4, 1, 1, true)
        .build(rng, init_std)
}

/// Shape checks that must pass before any generator compute.
pub fn check_generator_input<T: Real>(x: &Tensor<T>) -> Result<()> {
    if x.n == 0 {
        return Err(Error::Empty("generator batch"));
    }
    if x.c != 3 {
        return Err(Error::Shape(format!("generator expects 3 channels, got {}", x.c)));
    }
    if x.h % 4 != 0 || x.w % 4 != 0 || x.h < 8 || x.w < 8 {
        return Err(Error::Shape(format!(
            "generator input must be at least 8x8 with sides divisible by 4, got {}x{}",
            x.h, x.w
        )));
    }
    Ok(())
}

pub fn check_discriminator_input<T: Real>(cfg: &DiscriminatorConfig, x: &Tensor<T>) -> Result<()> {
    if x.n == 0 {
        return Err(Error::Empty("discriminator batch"));
    }
    if x.c != 3 {
        return Err(Error::Shape(format!("discriminator expects 3 channels, got {}", x.c)));
    }
    if cfg.score_map_len(x.h).is_none() || cfg.score_map_len(x.w).is_none() {
        return Err(Error::Shape(format!(
            "{}x{} input too small for a {}-layer patch discriminator",
            x.h, x.w, cfg.n_layers
        )));
    }
    Ok(())
}

/// Applies a generator to a [-1, 1] batch.
pub fn generator_forward<T: Real>(net: &Network<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    check_generator_input(x)?;
    net.forward(x)
}

/// Score map (one channel) of a discriminator.
pub fn discriminator_forward<T: Real>(net: &Network<T>, cfg: &DiscriminatorConfig, x: &Tensor<T>) -> Result<Tensor<T>> {
    check_discriminator_input(cfg, x)?;
    net.forward(x)
}
