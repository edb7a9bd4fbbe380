//! Gait abnormality scoring from Kinect-2 skeletons.
//!
//! Each frame is reduced to three normalized 17-joint axis vectors
//! ([`skeleton`]), one sparse auto-encoder per axis is trained on normal
//! walking only ([`autoencoder`]), and the per-axis reconstruction errors are
//! fused into an abnormality index ([`index`]) that is evaluated with ROC
//! analysis ([`evalmetrics`]). [`harness`] holds file formats, the synthetic
//! gait generator, and the experiment runner; [`api`] holds the JSON bodies
//! shared by the HTTP server and client.

pub mod api;
pub mod autoencoder;
pub mod evalmetrics;
pub mod harness;
pub mod index;
pub mod skeleton;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coordinate axis a model is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AxisTag {
    X,
    Y,
    Z,
}

impl AxisTag {
    pub const ALL: [AxisTag; 3] = [AxisTag::X, AxisTag::Y, AxisTag::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn lowercase(self) -> &'static str {
        match self {
            AxisTag::X => "x",
            AxisTag::Y => "y",
            AxisTag::Z => "z",
        }
    }
}

impl std::fmt::Display for AxisTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.lowercase().to_uppercase())
    }
}

impl std::str::FromStr for AxisTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(AxisTag::X),
            "y" | "Y" => Ok(AxisTag::Y),
            "z" | "Z" => Ok(AxisTag::Z),
            other => Err(format!("unknown axis {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Skeleton(#[from] skeleton::SkeletonError),
    #[error(transparent)]
    Model(#[from] autoencoder::ModelError),
    #[error(transparent)]
    Train(#[from] autoencoder::TrainError),
    #[error(transparent)]
    Index(#[from] index::IndexError),
    #[error(transparent)]
    Metrics(#[from] evalmetrics::MetricsError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
}

impl Error {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Skeleton(_) => "validation",
            Error::Model(_) => "model",
            Error::Train(_) => "training",
            Error::Index(_) => "index",
            Error::Metrics(_) => "evaluation",
            Error::Harness(h) => h.kind(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
