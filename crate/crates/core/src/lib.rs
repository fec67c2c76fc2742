//! Unpaired translation of artifact-degraded endoscopy frames into clean
//! frames, with the simulation and evaluation machinery around it.
//!
//! * [`imaging`]: image types, manifests, patient-wise splits.
//! * [`degrade`]: seeded artifact simulator and paired corpus builder.
//! * [`nn`]: small CPU convolution engine with manual backward passes.
//! * [`gan`]: two-generator / two-discriminator translator and its training loop.
//! * [`metrics`]: IoU matching, precision/recall/F1, AP and report tables.
//! * [`pipeline`]: stage orchestration used by the `framerestore` CLI.

pub mod error;
pub mod degrade;
pub mod imaging;
pub mod gan;
pub mod metrics;
pub mod nn;
pub mod pipeline;

pub use error::{Error, ErrorCategory, Result};
