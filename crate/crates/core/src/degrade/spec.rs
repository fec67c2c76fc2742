use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest channel or row displacement accepted, in pixels.
pub const MAX_SHIFT: i32 = 8;
pub const MAX_BLUR_LENGTH: u32 = 31;
pub const MAX_BLOBS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArtifactKind {
    GhostColor,
    Interlacing,
    MotionBlur,
    LowIllumination,
    OcclusionBlobs,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 5] = [
        ArtifactKind::GhostColor,
        ArtifactKind::Interlacing,
        ArtifactKind::MotionBlur,
        ArtifactKind::LowIllumination,
        ArtifactKind::OcclusionBlobs,
    ];
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One parametric artifact model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum Artifact {
    /// Red and blue planes translated independently; green untouched.
    GhostColor {
        red_dx: i32,
        red_dy: i32,
        blue_dx: i32,
        blue_dy: i32,
    },
    /// Odd rows shifted right by `displacement` pixels.
    Interlacing { displacement: i32 },
    /// Odd `length`-tap line kernel at `angle` radians.
    MotionBlur { length: u32, angle: f64 },
    /// `gain · v^gamma` on the [0, 1] scale.
    LowIllumination { gain: f64, gamma: f64 },
    /// Brown soft-edged ellipses imitating fecal deposits.
    OcclusionBlobs { count: u32 },
}

impl Artifact {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            Artifact::GhostColor { .. } => ArtifactKind::GhostColor,
            Artifact::Interlacing { .. } => ArtifactKind::Interlacing,
            Artifact::MotionBlur { .. } => ArtifactKind::MotionBlur,
            Artifact::LowIllumination { .. } => ArtifactKind::LowIllumination,
            Artifact::OcclusionBlobs { .. } => ArtifactKind::OcclusionBlobs,
        }
    }

    /// Parameters that leave every image unchanged.
    pub fn identity(kind: ArtifactKind) -> Self {
        match kind {
            ArtifactKind::GhostColor => Artifact::GhostColor {
                red_dx: 0,
                red_dy: 0,
                blue_dx: 0,
                blue_dy: 0,
            },
            ArtifactKind::Interlacing => Artifact::Interlacing { displacement: 0 },
            ArtifactKind::MotionBlur => Artifact::MotionBlur { length: 1, angle: 0.0 },
            ArtifactKind::LowIllumination => Artifact::LowIllumination { gain: 1.0, gamma: 1.0 },
            ArtifactKind::OcclusionBlobs => Artifact::OcclusionBlobs { count: 0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn shift(field: &'static str, v: i32) -> Result<()> {
            if v.abs() > MAX_SHIFT {
                return Err(Error::param(field, format!("|{v}| exceeds {MAX_SHIFT} px")));
            }
            Ok(())
        }
        match *self {
            Artifact::GhostColor {
                red_dx,
                red_dy,
                blue_dx,
                blue_dy,
            } => {
                shift("red_dx", red_dx)?;
                shift("red_dy", red_dy)?;
                shift("blue_dx", blue_dx)?;
                shift("blue_dy", blue_dy)
            }
            Artifact::Interlacing { displacement } => shift("displacement", displacement),
            Artifact::MotionBlur { length, angle } => {
                if length == 0 || length > MAX_BLUR_LENGTH || length % 2 == 0 {
                    return Err(Error::param("length", format!("{length} is not an odd value in [1, {MAX_BLUR_LENGTH}]")));
                }
                if !(0.0..PI).contains(&angle) {
                    return Err(Error::param("angle", format!("{angle} outside [0, π)")));
                }
                Ok(())
            }
            Artifact::LowIllumination { gain, gamma } => {
                if !(gain > 0.0 && gain <= 1.0) {
                    return Err(Error::param("gain", format!("{gain} outside (0, 1]")));
                }
                if !(1.0..=3.0).contains(&gamma) {
                    return Err(Error::param("gamma", format!("{gamma} outside [1, 3]")));
                }
                Ok(())
            }
            Artifact::OcclusionBlobs { count } => {
                if count > MAX_BLOBS {
                    return Err(Error::param("count", format!("{count} exceeds {MAX_BLOBS}")));
                }
                Ok(())
            }
        }
    }
}

/// An artifact plus the seed driving any randomness inside it.
///
/// JSON form: `{"kind": ..., "params": {...}, "seed": ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    #[serde(flatten)]
    pub artifact: Artifact,
    #[serde(default)]
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(artifact: Artifact, seed: u64) -> Self {
        Self { artifact, seed }
    }

    pub fn kind(&self) -> ArtifactKind {
        self.artifact.kind()
    }

    pub fn validate(&self) -> Result<()> {
        self.artifact.validate()
    }
}

impl From<Artifact> for DegradationSpec {
    fn from(artifact: Artifact) -> Self {
        Self { artifact, seed: 0 }
    }
}
