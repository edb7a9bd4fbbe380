//! Gait abnormality index: per-axis reconstruction errors fused with weights
//! inversely proportional to each model's training error, then averaged over
//! segments and whole sequences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoencoder::{AxisModel, ModelError};
use crate::skeleton::PostureTriplet;
use crate::AxisTag;

pub const DEFAULT_SEGMENT_LENGTH: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("training error of the {0} model is zero; its fusion weight would be infinite")]
    DegenerateTraining(AxisTag),
    #[error("training error must be positive and finite, got {0}")]
    BadError(f64),
    #[error("the {0} model has not been trained")]
    Untrained(AxisTag),
    #[error("expected exactly one model per axis, got {0} models")]
    ModelCount(usize),
    #[error("bundle slot {slot} holds the {found} model")]
    WrongAxis { slot: AxisTag, found: AxisTag },
    #[error("cannot aggregate an empty index series")]
    Empty,
    #[error("segment length must be at least 1")]
    ZeroSegment,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-axis fusion weights, X, Y, Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FusionWeights {
    pub const ONES: FusionWeights = FusionWeights { x: 1.0, y: 1.0, z: 1.0 };

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// `w_k = (e_x + e_y + e_z) / e_k`.
pub fn fusion_weights(e_x: f64, e_y: f64, e_z: f64) -> Result<FusionWeights, IndexError> {
    for (e, axis) in [(e_x, AxisTag::X), (e_y, AxisTag::Y), (e_z, AxisTag::Z)] {
        if e == 0.0 {
            return Err(IndexError::DegenerateTraining(axis));
        }
        if !(e > 0.0 && e.is_finite()) {
            return Err(IndexError::BadError(e));
        }
    }
    let sum = e_x + e_y + e_z;
    Ok(FusionWeights {
        x: sum / e_x,
        y: sum / e_y,
        z: sum / e_z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Weighted,
    Unweighted,
}

/// Three trained axis models plus the fusion weights derived from their
/// training errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerBundle {
    models: [AxisModel; 3],
    weights: FusionWeights,
}

impl ScorerBundle {
    pub fn new(x: AxisModel, y: AxisModel, z: AxisModel) -> Result<Self, IndexError> {
        let models = [x, y, z];
        let mut errors = [0.0; 3];
        for (slot, m) in AxisTag::ALL.iter().zip(&models) {
            if m.axis != *slot {
                return Err(IndexError::WrongAxis { slot: *slot, found: m.axis });
            }
            errors[slot.index()] = m.train_mse.ok_or(IndexError::Untrained(*slot))?;
        }
        let weights = fusion_weights(errors[0], errors[1], errors[2])?;
        Ok(ScorerBundle { models, weights })
    }

    /// Builds a bundle from three models given in any order.
    pub fn from_models(models: Vec<AxisModel>) -> Result<Self, IndexError> {
        if models.len() != 3 {
            return Err(IndexError::ModelCount(models.len()));
        }
        let mut slots: [Option<AxisModel>; 3] = [None, None, None];
        for m in models {
            let i = m.axis.index();
            if slots[i].is_some() {
                return Err(IndexError::ModelCount(3));
            }
            slots[i] = Some(m);
        }
        let [Some(x), Some(y), Some(z)] = slots else {
            unreachable!("three distinct axes fill three slots")
        };
        Self::new(x, y, z)
    }

    pub fn weights(&self) -> FusionWeights {
        self.weights
    }

    pub fn model(&self, axis: AxisTag) -> &AxisModel {
        &self.models[axis.index()]
    }

    pub fn models(&self) -> &[AxisModel; 3] {
        &self.models
    }

    pub fn train_errors(&self) -> [f64; 3] {
        self.models.each_ref().map(|m| m.train_mse.unwrap_or(0.0))
    }

    /// Reconstruction MSE of each axis model on its axis vector.
    pub fn axis_errors(&self, p: &PostureTriplet) -> Result<[f64; 3], IndexError> {
        let mut out = [0.0; 3];
        for axis in AxisTag::ALL {
            out[axis.index()] = self.model(axis).reconstruction_error(p.axis(axis))?;
        }
        Ok(out)
    }

    pub fn frame_index(&self, p: &PostureTriplet, mode: FusionMode) -> Result<f64, IndexError> {
        Ok(combine(&self.axis_errors(p)?, &self.weights, mode))
    }

    /// Scores a whole sequence, batching each axis through its network.
    pub fn score_frames(&self, frames: &[PostureTriplet]) -> Result<FrameScores, IndexError> {
        if frames.is_empty() {
            return Err(IndexError::Empty);
        }
        let mut axis = [Vec::new(), Vec::new(), Vec::new()];
        for tag in AxisTag::ALL {
            let flat: Vec<f64> = frames.iter().flat_map(|p| p.axis(tag).iter().copied()).collect();
            let errs = self.model(tag).network.row_errors(&flat, frames.len());
            if let Some(bad) = errs.iter().position(|e| !e.is_finite()) {
                return Err(ModelError::NonFinite { layer: bad }.into());
            }
            axis[tag.index()] = errs;
        }
        let fused = |mode| -> Vec<f64> {
            (0..frames.len())
                .map(|i| combine(&[axis[0][i], axis[1][i], axis[2][i]], &self.weights, mode))
                .collect()
        };
        Ok(FrameScores {
            weighted: fused(FusionMode::Weighted),
            unweighted: fused(FusionMode::Unweighted),
            axis,
        })
    }
}

/// Per-frame scores of one sequence under every fusion variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub weighted: Vec<f64>,
    pub unweighted: Vec<f64>,
    /// Per-axis reconstruction errors, indexed X, Y, Z.
    pub axis: [Vec<f64>; 3],
}

impl FrameScores {
    pub fn by_mode(&self, mode: FusionMode) -> &[f64] {
        match mode {
            FusionMode::Weighted => &self.weighted,
            FusionMode::Unweighted => &self.unweighted,
        }
    }
}

/// Weighted or plain sum of the three axis errors.
pub fn combine(errors: &[f64; 3], weights: &FusionWeights, mode: FusionMode) -> f64 {
    match mode {
        FusionMode::Weighted => errors.iter().zip(weights.as_array()).map(|(e, w)| e * w).sum(),
        FusionMode::Unweighted => errors.iter().sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    pub per_frame: Vec<f64>,
    pub segment_length: usize,
    pub per_segment: Vec<f64>,
    pub per_sequence: f64,
}

/// Non-overlapping windows of `segment_length`; a trailing partial window is
/// kept at its true size.
pub fn aggregate(per_frame: &[f64], segment_length: usize) -> Result<IndexSeries, IndexError> {
    if per_frame.is_empty() {
        return Err(IndexError::Empty);
    }
    if segment_length == 0 {
        return Err(IndexError::ZeroSegment);
    }
    let per_segment = per_frame.chunks(segment_length).map(mean).collect();
    Ok(IndexSeries {
        per_frame: per_frame.to_vec(),
        segment_length,
        per_segment,
        per_sequence: mean(per_frame),
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
