//! JSON request and response bodies of the HTTP service.

use serde::{Deserialize, Serialize};

use crate::autoencoder::{BatchStats, FilterImage, JointLayout, ModelFile, TrainConfig};
use crate::evalmetrics::{LabeledScore, MetricReport, RocCurve};
use crate::harness::experiment::SequenceRecord;
use crate::harness::io::IndexSummary;
use crate::harness::{ExperimentReport, SynthPlan};
use crate::index::{FusionMode, FusionWeights, DEFAULT_SEGMENT_LENGTH};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub kind: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        ErrorBody {
            error: ErrorDetail {
                kind: kind.into(),
                message: message.into(),
            },
        }
    }
}

impl From<&crate::Error> for ErrorBody {
    fn from(e: &crate::Error) -> Self {
        ErrorBody::new(e.kind(), e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SynthRequest {
    #[serde(default)]
    pub plan: SynthPlan,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthResponse {
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub sequences: Vec<SequenceRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRequest {
    /// Only normal sequences are used; abnormal ones are rejected.
    pub sequences: Vec<SequenceRecord>,
    #[serde(default)]
    pub config: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResponse {
    pub bundle_id: String,
    pub frames: usize,
    /// X, Y, Z.
    pub models: Vec<ModelFile>,
    pub weights: FusionWeights,
    pub train_mse: [f64; 3],
    pub epoch_loss: [Vec<f64>; 3],
    /// Per-batch loss terms, only when requested with `?logs=true`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logs: Option<[Vec<BatchStats>; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleRequest {
    /// Three models, one per axis, in any order.
    pub models: Vec<ModelFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleInfo {
    pub bundle_id: String,
    pub weights: FusionWeights,
    pub train_mse: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreOptions {
    #[serde(default = "default_mode")]
    pub mode: FusionMode,
    #[serde(default = "default_segment_length")]
    pub segment_length: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            mode: default_mode(),
            segment_length: default_segment_length(),
        }
    }
}

fn default_mode() -> FusionMode {
    FusionMode::Weighted
}

fn default_segment_length() -> usize {
    DEFAULT_SEGMENT_LENGTH
}

/// Scoring against a registered bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleScoreRequest {
    pub sequence: SequenceRecord,
    #[serde(default, flatten)]
    pub options: ScoreOptions,
}

/// Scoring with models shipped in the request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub models: Vec<ModelFile>,
    pub sequence: SequenceRecord,
    #[serde(default, flatten)]
    pub options: ScoreOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub frame_indices: Vec<u64>,
    pub per_frame: Vec<f64>,
    /// Per-axis reconstruction errors, X, Y, Z.
    pub axis_errors: [Vec<f64>; 3],
    pub summary: IndexSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRequest {
    pub scores: Vec<LabeledScore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResponse {
    pub report: MetricReport,
    pub roc: RocCurve,
    pub table: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiltersRequest {
    pub model: ModelFile,
    #[serde(default)]
    pub layout: Option<JointLayout>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiltersResponse {
    pub filters: Vec<FilterImage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRequest {
    pub manifest: crate::harness::Manifest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResponse {
    pub report: ExperimentReport,
    pub models: Vec<ModelFile>,
    pub table: String,
}
