//! Image representation, dataset manifests and patient-wise splitting.

mod boxes;
mod image;
mod manifest;
mod split;

pub use self::image::{
    denormalize, normalize, normalize_levels, psnr, raster_to_unit, unit_to_raster, ImageTensor, Raster, CHANNELS,
};
pub use boxes::{BoundingBox, Detection};
pub use manifest::{validate_manifest, DatasetManifest, FrameRecord, Quality, Violation};
pub(crate) use split::seeded_permutation;
pub use split::{patient_wise_split, SplitRatios, Splits};
