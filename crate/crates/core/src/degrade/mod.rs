//! Seeded simulation of the frame artifacts the translator learns to undo:
//! ghost colors, interlacing, motion blur, low illumination and
//! deposit-like occlusions.

mod apply;
mod corpus;
pub mod scene;
mod spec;

pub use apply::{apply_artifact, compose, line_kernel_taps};
pub use corpus::{
    build_paired_corpus, degraded_id, derive_seed, read_pairs_csv, write_pairs_csv, Pair, PairedCorpus, ParamRanges,
    RandomSampler, SpecSampler, CLEAN_MANIFEST, DEGRADED_MANIFEST, PAIRS_FILE, SPECS_FILE,
};

pub(crate) use corpus::file_stem;
pub use spec::{Artifact, ArtifactKind, DegradationSpec, MAX_BLOBS, MAX_BLUR_LENGTH, MAX_SHIFT};
