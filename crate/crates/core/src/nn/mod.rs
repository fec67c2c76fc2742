//! Minimal CPU network engine: convolution stacks with hand-written
//! backward passes, enough for residual generators and patch
//! discriminators.

mod adam;
mod net;
pub mod ops;
mod real;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use net::{ConvLayer, Layer, NetBuilder, Network, Tape};
pub use real::Real;
pub use tensor::Tensor;
