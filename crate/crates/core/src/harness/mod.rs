//! Dataset formats, the synthetic gait generator, and experiment orchestration.

pub mod experiment;
pub mod io;
pub mod synth;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalmetrics::Label;
use crate::skeleton::RawSkeleton;

pub use experiment::{run_experiment, ExperimentOutput, ExperimentReport, ExperimentSplit, Manifest};
pub use io::{load_sequence, parse_sequence_csv, sequence_to_csv, write_sequence};
pub use synth::{synth_gait, SubjectProfile, SynthConfig, SynthPlan};

/// Walking condition of a recorded or generated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaitKind {
    Normal,
    /// A raised sole of `height_cm` under the right foot.
    SolePad { height_cm: f64 },
    /// A weight of `kg` strapped to the left ankle.
    AnkleWeight { kg: f64 },
}

impl GaitKind {
    pub fn is_abnormal(&self) -> bool {
        !matches!(self, GaitKind::Normal)
    }

    pub fn label(&self) -> Label {
        if self.is_abnormal() {
            Label::Abnormal
        } else {
            Label::Normal
        }
    }

    /// Short name used in file names, e.g. `sole_pad_10cm`.
    pub fn slug(&self) -> String {
        match self {
            GaitKind::Normal => "normal".into(),
            GaitKind::SolePad { height_cm } => format!("sole_pad_{height_cm}cm"),
            GaitKind::AnkleWeight { kg } => format!("ankle_weight_{kg}kg"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSequence {
    pub subject_id: String,
    pub gait: GaitKind,
    pub frames: Vec<RawSkeleton>,
}

impl GaitSequence {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.frames.is_empty() {
            return Err(HarnessError::Data(format!("sequence of {} has no frames", self.subject_id)));
        }
        let first = self.frames[0].frame_index;
        for (i, f) in self.frames.iter().enumerate() {
            f.validate().map_err(|e| HarnessError::Data(e.to_string()))?;
            if f.frame_index != first + i as u64 {
                return Err(HarnessError::NonConsecutive {
                    line: i + 2,
                    expected: first + i as u64,
                    found: f.frame_index,
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        format!("{}_{}", self.subject_id, self.gait.slug())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: frame {found} is not consecutive (expected {expected})")]
    NonConsecutive { line: usize, expected: u64, found: u64 },
    #[error("{0}")]
    Data(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("json: {0}")]
    Json(String),
}

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Io { .. } => "io",
            HarnessError::Parse { .. }
            | HarnessError::ColumnCount { .. }
            | HarnessError::NonConsecutive { .. }
            | HarnessError::Json(_) => "parse",
            HarnessError::Data(_) => "data",
            HarnessError::Split(_) => "split",
            HarnessError::Manifest(_) => "manifest",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
