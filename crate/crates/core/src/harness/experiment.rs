//! Train on normal gaits of the training subjects, score every test sequence,
//! and evaluate the nine index variants (three single-axis models, plain sum
//! and weighted sum at frame, segment and sequence granularity).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::io::{parse_sequence_csv, sequence_to_csv, sha256_hex};
use super::synth::SynthPlan;
use super::{GaitKind, GaitSequence, HarnessError};
use crate::autoencoder::{epoch_means, train, AxisModel, BatchStats, TrainConfig};
use crate::evalmetrics::{evaluate, format_table, LabeledScore, MetricReport, RocCurve};
use crate::index::{aggregate, FrameScores, FusionMode, FusionWeights, ScorerBundle, DEFAULT_SEGMENT_LENGTH};
use crate::skeleton::{preprocess, AxisVector, JointMask, PostureTriplet};
use crate::{AxisTag, Error};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSplit {
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
}

impl ExperimentSplit {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.train_subjects.is_empty() || self.test_subjects.is_empty() {
            return Err(HarnessError::Split("both subject sets must be nonempty".into()));
        }
        let train: BTreeSet<&String> = self.train_subjects.iter().collect();
        if let Some(s) = self.test_subjects.iter().find(|s| train.contains(s)) {
            return Err(HarnessError::Split(format!("subject {s} is in both train and test sets")));
        }
        Ok(())
    }
}

/// A sequence shipped inline as CSV text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub subject_id: String,
    pub gait: GaitKind,
    pub csv: String,
}

impl SequenceRecord {
    pub fn from_sequence(seq: &GaitSequence) -> Self {
        SequenceRecord {
            subject_id: seq.subject_id.clone(),
            gait: seq.gait,
            csv: sequence_to_csv(&seq.frames),
        }
    }

    pub fn parse(&self) -> Result<GaitSequence, HarnessError> {
        let frames = parse_sequence_csv(&self.csv).map_err(|e| {
            HarnessError::Data(format!("{} {}: {e}", self.subject_id, self.gait.slug()))
        })?;
        Ok(GaitSequence {
            subject_id: self.subject_id.clone(),
            gait: self.gait,
            frames,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthPlan),
    /// A dataset directory (see [`super::io::write_dataset`]) readable by the
    /// process running the experiment.
    Directory { path: String },
    Inline { sequences: Vec<SequenceRecord> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_name")]
    pub name: String,
    pub data: DataSource,
    /// Required unless `data` is synthetic, whose plan implies a split.
    #[serde(default)]
    pub split: Option<ExperimentSplit>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_segment_length")]
    pub segment_length: usize,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_segment_length() -> usize {
    DEFAULT_SEGMENT_LENGTH
}

impl Default for Manifest {
    /// Five training and four test subjects, normal gait plus four
    /// abnormal conditions, 1200 frames per sequence.
    fn default() -> Self {
        Manifest {
            name: "default".into(),
            data: DataSource::Synthetic(SynthPlan::default()),
            split: None,
            train: TrainConfig::default(),
            segment_length: DEFAULT_SEGMENT_LENGTH,
        }
    }
}

impl Manifest {
    pub fn resolve_split(&self) -> Result<ExperimentSplit, HarnessError> {
        let split = match (&self.split, &self.data) {
            (Some(s), _) => s.clone(),
            (None, DataSource::Synthetic(plan)) => plan.split(),
            (None, _) => return Err(HarnessError::Manifest("split is required for non-synthetic data".into())),
        };
        split.validate()?;
        Ok(split)
    }

    /// Copy of the manifest with directory data read into inline records, so
    /// it can be shipped to a process without access to the directory.
    pub fn with_inline_data(&self) -> Result<Manifest, HarnessError> {
        let mut m = self.clone();
        if let DataSource::Directory { .. } = &self.data {
            let sequences = self.load_sequences()?.iter().map(SequenceRecord::from_sequence).collect();
            m.data = DataSource::Inline { sequences };
        }
        Ok(m)
    }

    pub fn load_sequences(&self) -> Result<Vec<GaitSequence>, HarnessError> {
        let seqs = match &self.data {
            DataSource::Synthetic(plan) => plan.generate(),
            DataSource::Directory { path } => super::io::load_dataset(std::path::Path::new(path))?,
            DataSource::Inline { sequences } => sequences.iter().map(SequenceRecord::parse).collect::<Result<_, _>>()?,
        };
        for s in &seqs {
            s.validate()?;
        }
        Ok(seqs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Frame,
    Segment,
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    Axis(AxisTag),
    Sum,
    WeightedSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub scorer: Scorer,
    pub granularity: Granularity,
    pub report: MetricReport,
    pub roc: RocCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceHash {
    pub subject_id: String,
    pub gait: GaitKind,
    pub frames: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub subjects: Vec<String>,
    pub frames: usize,
    /// Training-set reconstruction MSE per axis, X, Y, Z.
    pub train_mse: [f64; 3],
    pub weights: FusionWeights,
    /// Mean total loss per epoch, per axis.
    pub epoch_loss: [Vec<f64>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub subject_id: String,
    pub gait: GaitKind,
    pub frame_indices: Vec<u64>,
    pub scores: FrameScores,
}

impl ScoredSequence {
    pub fn name(&self) -> String {
        format!("{}_{}", self.subject_id, self.gait.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub manifest: Manifest,
    pub split: ExperimentSplit,
    pub data_sha256: String,
    pub sequences: Vec<SequenceHash>,
    pub training: TrainingSummary,
    /// Frames (over all sequences) with a constant axis vector.
    pub degenerate_frames: usize,
    pub rows: Vec<ReportRow>,
    pub scored: Vec<ScoredSequence>,
}

impl ExperimentReport {
    pub fn row(&self, scorer: Scorer, granularity: Granularity) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.scorer == scorer && r.granularity == granularity)
    }

    /// Aligned text table, one row per index variant.
    pub fn table(&self) -> String {
        render_table(&self.rows)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub models: [AxisModel; 3],
    pub logs: [Vec<BatchStats>; 3],
}

pub fn render_table(rows: &[ReportRow]) -> String {
    format_table(rows.iter().map(|r| (r.name.as_str(), &r.report)))
}

/// Preprocessed frames of one sequence plus the count of degenerate frames.
pub fn preprocess_sequence(seq: &GaitSequence) -> Result<(Vec<PostureTriplet>, usize), Error> {
    let mask = JointMask::default();
    let triplets = seq
        .frames
        .iter()
        .map(|f| preprocess(f, &mask))
        .collect::<Result<Vec<_>, _>>()?;
    let degenerate = triplets.iter().filter(|t| t.degenerate.iter().any(|&d| d)).count();
    Ok((triplets, degenerate))
}

/// Per-axis training samples drawn only from normal sequences of training
/// subjects. Returns the samples and the subjects that contributed.
pub fn training_set(
    sequences: &[(GaitSequence, Vec<PostureTriplet>)],
    split: &ExperimentSplit,
) -> Result<([Vec<AxisVector>; 3], Vec<String>), HarnessError> {
    let train: BTreeSet<&str> = split.train_subjects.iter().map(String::as_str).collect();
    let test: BTreeSet<&str> = split.test_subjects.iter().map(String::as_str).collect();
    let mut samples = [Vec::new(), Vec::new(), Vec::new()];
    let mut used = BTreeSet::new();
    for (seq, triplets) in sequences {
        if seq.gait.is_abnormal() || !train.contains(seq.subject_id.as_str()) {
            continue;
        }
        assert!(!test.contains(seq.subject_id.as_str()), "test subject reached training set");
        used.insert(seq.subject_id.clone());
        for t in triplets {
            for axis in AxisTag::ALL {
                samples[axis.index()].push(*t.axis(axis));
            }
        }
    }
    if used.is_empty() {
        return Err(HarnessError::Data("no normal sequences from training subjects".into()));
    }
    Ok((samples, used.into_iter().collect()))
}

/// Trains the X, Y and Z models concurrently on their own sample sets.
pub fn train_axes(samples: &[Vec<AxisVector>; 3], cfg: &TrainConfig) -> Result<[(AxisModel, Vec<BatchStats>); 3], Error> {
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = AxisTag::ALL
            .iter()
            .map(|&axis| scope.spawn(move || train(axis, &samples[axis.index()], cfg)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(3);
    for r in results {
        let o = r?;
        out.push((o.model, o.log));
    }
    Ok(out.try_into().unwrap_or_else(|_| unreachable!()))
}

/// Per-axis samples from every frame of the given sequences, all of which
/// must be normal gaits.
pub fn normal_samples(sequences: &[GaitSequence]) -> Result<[Vec<AxisVector>; 3], Error> {
    let mut samples = [Vec::new(), Vec::new(), Vec::new()];
    for seq in sequences {
        if seq.gait.is_abnormal() {
            return Err(HarnessError::Data(format!("{} is not a normal gait; training uses normal gaits only", seq.name())).into());
        }
        seq.validate()?;
        for t in preprocess_sequence(seq)?.0 {
            for axis in AxisTag::ALL {
                samples[axis.index()].push(*t.axis(axis));
            }
        }
    }
    if samples[0].is_empty() {
        return Err(HarnessError::Data("no training sequences".into()).into());
    }
    Ok(samples)
}

pub fn score_sequence(bundle: &ScorerBundle, seq: &GaitSequence) -> Result<ScoredSequence, Error> {
    seq.validate()?;
    let (triplets, _) = preprocess_sequence(seq)?;
    Ok(ScoredSequence {
        subject_id: seq.subject_id.clone(),
        gait: seq.gait,
        frame_indices: seq.frames.iter().map(|f| f.frame_index).collect(),
        scores: bundle.score_frames(&triplets)?,
    })
}

pub fn run_experiment(manifest: &Manifest) -> Result<ExperimentOutput, Error> {
    if manifest.segment_length == 0 {
        return Err(HarnessError::Manifest("segment_length must be at least 1".into()).into());
    }
    manifest.train.validate()?;
    let split = manifest.resolve_split()?;
    let sequences = manifest.load_sequences()?;

    let hashes: Vec<SequenceHash> = sequences
        .iter()
        .map(|s| SequenceHash {
            subject_id: s.subject_id.clone(),
            gait: s.gait,
            frames: s.frames.len(),
            sha256: sha256_hex(sequence_to_csv(&s.frames).as_bytes()),
        })
        .collect();
    let data_sha256 = sha256_hex(hashes.iter().map(|h| h.sha256.as_str()).collect::<Vec<_>>().join("\n").as_bytes());

    let mut prepared = Vec::with_capacity(sequences.len());
    let mut degenerate_frames = 0;
    for seq in sequences {
        let (t, d) = preprocess_sequence(&seq)?;
        degenerate_frames += d;
        prepared.push((seq, t));
    }

    let (samples, subjects) = training_set(&prepared, &split)?;
    let trained = train_axes(&samples, &manifest.train)?;
    let [(mx, lx), (my, ly), (mz, lz)] = trained;
    let bundle = ScorerBundle::new(mx, my, mz)?;

    let test: BTreeSet<&str> = split.test_subjects.iter().map(String::as_str).collect();
    let targets: Vec<_> = prepared.iter().filter(|(seq, _)| test.contains(seq.subject_id.as_str())).collect();
    let scored = std::thread::scope(|scope| {
        let handles: Vec<_> = targets
            .iter()
            .map(|(seq, triplets)| {
                let bundle = &bundle;
                scope.spawn(move || -> Result<ScoredSequence, Error> {
                    Ok(ScoredSequence {
                        subject_id: seq.subject_id.clone(),
                        gait: seq.gait,
                        frame_indices: seq.frames.iter().map(|f| f.frame_index).collect(),
                        scores: bundle.score_frames(triplets)?,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scoring thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    if scored.is_empty() {
        return Err(HarnessError::Data("no sequences from test subjects".into()).into());
    }

    let rows = evaluate_rows(&scored, manifest.segment_length)?;
    let logs = [lx, ly, lz];
    let training = TrainingSummary {
        subjects,
        frames: samples[0].len(),
        train_mse: bundle.train_errors(),
        weights: bundle.weights(),
        epoch_loss: logs.each_ref().map(|l| epoch_means(l)),
    };
    let report = ExperimentReport {
        manifest: manifest.clone(),
        split,
        data_sha256,
        sequences: hashes,
        training,
        degenerate_frames,
        rows,
        scored,
    };
    Ok(ExperimentOutput {
        report,
        models: bundle.models().clone(),
        logs,
    })
}

/// Labeled scores for one scorer at one granularity, pooled over sequences.
pub fn labeled_scores(
    scored: &[ScoredSequence],
    scorer: Scorer,
    granularity: Granularity,
    segment_length: usize,
) -> Result<Vec<LabeledScore>, Error> {
    let mut out = Vec::new();
    for s in scored {
        let per_frame: &[f64] = match scorer {
            Scorer::Axis(a) => &s.scores.axis[a.index()],
            Scorer::Sum => s.scores.by_mode(FusionMode::Unweighted),
            Scorer::WeightedSum => s.scores.by_mode(FusionMode::Weighted),
        };
        let label = s.gait.label();
        let series = aggregate(per_frame, segment_length)?;
        let values: Vec<f64> = match granularity {
            Granularity::Frame => series.per_frame,
            Granularity::Segment => series.per_segment,
            Granularity::Sequence => vec![series.per_sequence],
        };
        out.extend(values.into_iter().map(|v| LabeledScore::new(v, label)));
    }
    Ok(out)
}

fn evaluate_rows(scored: &[ScoredSequence], segment_length: usize) -> Result<Vec<ReportRow>, Error> {
    let mut plan: Vec<(String, Scorer, Granularity)> = AxisTag::ALL
        .iter()
        .map(|&a| (format!("{a}-axis model"), Scorer::Axis(a), Granularity::Frame))
        .collect();
    for (scorer, label) in [(Scorer::Sum, "sum"), (Scorer::WeightedSum, "weighted sum")] {
        for (g, gl) in [
            (Granularity::Frame, "frame"),
            (Granularity::Segment, "segment"),
            (Granularity::Sequence, "sequence"),
        ] {
            plan.push((format!("per-{gl} {label}"), scorer, g));
        }
    }
    plan.into_iter()
        .map(|(name, scorer, granularity)| {
            let scores = labeled_scores(scored, scorer, granularity, segment_length)?;
            let (roc, report) = evaluate(&scores)?;
            Ok(ReportRow {
                name,
                scorer,
                granularity,
                report,
                roc,
            })
        })
        .collect()
}
