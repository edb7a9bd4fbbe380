//! File formats.
//!
//! Skeleton sequence CSV: header `frame,j0x,j0y,j0z,...,j24x,j24y,j24z`, one
//! row per frame, frame numbers consecutive and ascending. Joint `jK` follows
//! the Kinect-2 enumeration (see [`crate::skeleton::Joint`]).
//!
//! A dataset directory holds one CSV per sequence plus `index.json` naming
//! each file's subject and gait condition.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GaitKind, GaitSequence, HarnessError};
use crate::autoencoder::AxisModel;
use crate::index::{FusionMode, FusionWeights, IndexSeries};
use crate::skeleton::{RawSkeleton, JOINT_COUNT};

pub const SEQUENCE_COLUMNS: usize = 1 + 3 * JOINT_COUNT;
pub const DATASET_INDEX_FILE: &str = "index.json";

pub fn sequence_header() -> String {
    let mut h = String::from("frame");
    for j in 0..JOINT_COUNT {
        for c in ["x", "y", "z"] {
            h.push_str(&format!(",j{j}{c}"));
        }
    }
    h
}

/// Serializes frames with shortest round-trip float formatting.
pub fn sequence_to_csv(frames: &[RawSkeleton]) -> String {
    let mut out = sequence_header();
    out.push('\n');
    for f in frames {
        out.push_str(&f.frame_index.to_string());
        for p in &f.joints {
            for c in p {
                out.push(',');
                out.push_str(&c.to_string());
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_sequence_csv(text: &str) -> Result<Vec<RawSkeleton>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| HarnessError::Parse { line: 1, message: e.to_string() })?
        .clone();
    if header.len() != SEQUENCE_COLUMNS {
        return Err(HarnessError::ColumnCount {
            line: 1,
            expected: SEQUENCE_COLUMNS,
            found: header.len(),
        });
    }
    let expected = sequence_header();
    if header.iter().collect::<Vec<_>>().join(",") != expected {
        return Err(HarnessError::Parse {
            line: 1,
            message: "header does not match frame,j0x,j0y,j0z,...,j24z".into(),
        });
    }

    let mut frames: Vec<RawSkeleton> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| HarnessError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != SEQUENCE_COLUMNS {
            return Err(HarnessError::ColumnCount {
                line,
                expected: SEQUENCE_COLUMNS,
                found: rec.len(),
            });
        }
        let frame_index: u64 = rec[0].trim().parse().map_err(|_| HarnessError::Parse {
            line,
            message: format!("frame number {:?} is not a nonnegative integer", &rec[0]),
        })?;
        if let Some(prev) = frames.last() {
            if frame_index != prev.frame_index + 1 {
                return Err(HarnessError::NonConsecutive {
                    line,
                    expected: prev.frame_index + 1,
                    found: frame_index,
                });
            }
        }
        let mut joints = Vec::with_capacity(JOINT_COUNT);
        for j in 0..JOINT_COUNT {
            let mut p = [0.0; 3];
            for (c, v) in p.iter_mut().enumerate() {
                let field = &rec[1 + 3 * j + c];
                *v = field.trim().parse().map_err(|_| HarnessError::Parse {
                    line,
                    message: format!("column {} value {field:?} is not a number", 2 + 3 * j + c),
                })?;
            }
            joints.push(p);
        }
        let skeleton = RawSkeleton::new(frame_index, joints).map_err(|e| HarnessError::Parse {
            line,
            message: e.to_string(),
        })?;
        frames.push(skeleton);
    }
    if frames.is_empty() {
        return Err(HarnessError::Data("sequence file has no frames".into()));
    }
    Ok(frames)
}

pub fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub fn load_sequence(path: &Path, subject_id: &str, gait: GaitKind) -> Result<GaitSequence, HarnessError> {
    let frames = parse_sequence_csv(&read_text(path)?)?;
    Ok(GaitSequence {
        subject_id: subject_id.to_string(),
        gait,
        frames,
    })
}

pub fn write_sequence(path: &Path, seq: &GaitSequence) -> Result<(), HarnessError> {
    write_text(path, &sequence_to_csv(&seq.frames))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub file: String,
    pub subject_id: String,
    pub gait: GaitKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub sequences: Vec<DatasetEntry>,
}

impl DatasetIndex {
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(DATASET_INDEX_FILE);
        serde_json::from_str(&read_text(&path)?).map_err(|e| HarnessError::Json(format!("{}: {e}", path.display())))
    }
}

/// Writes each sequence as `<subject>_<gait>.csv` plus `index.json`.
pub fn write_dataset(dir: &Path, sequences: &[GaitSequence]) -> Result<DatasetIndex, HarnessError> {
    let mut entries = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let file = format!("{}.csv", seq.name());
        write_sequence(&dir.join(&file), seq)?;
        entries.push(DatasetEntry {
            file,
            subject_id: seq.subject_id.clone(),
            gait: seq.gait,
        });
    }
    let index = DatasetIndex { sequences: entries };
    write_text(
        &dir.join(DATASET_INDEX_FILE),
        &serde_json::to_string_pretty(&index).expect("index serializes"),
    )?;
    Ok(index)
}

pub fn load_dataset(dir: &Path) -> Result<Vec<GaitSequence>, HarnessError> {
    DatasetIndex::load(dir)?
        .sequences
        .iter()
        .map(|e| load_sequence(&dir.join(&e.file), &e.subject_id, e.gait))
        .collect()
}

pub fn save_model(path: &Path, model: &AxisModel) -> Result<(), HarnessError> {
    write_text(path, &model.to_json())
}

pub fn load_model(path: &Path) -> Result<AxisModel, HarnessError> {
    AxisModel::from_json(&read_text(path)?).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

/// Conventional model file names inside a model directory.
pub fn model_path(dir: &Path, axis: crate::AxisTag) -> PathBuf {
    dir.join(format!("model_{}.json", axis.lowercase()))
}

/// `frame,index` rows.
pub fn index_to_csv(frame_indices: &[u64], values: &[f64]) -> String {
    let mut out = String::from("frame,index\n");
    for (f, v) in frame_indices.iter().zip(values) {
        out.push_str(&format!("{f},{v}\n"));
    }
    out
}

/// Companion JSON written next to an index CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub sequence: String,
    pub mode: FusionMode,
    pub weights: FusionWeights,
    pub segment_length: usize,
    pub frames: usize,
    pub per_segment: Vec<f64>,
    pub per_sequence: f64,
}

impl IndexSummary {
    pub fn new(sequence: &str, mode: FusionMode, weights: FusionWeights, series: &IndexSeries) -> Self {
        IndexSummary {
            sequence: sequence.to_string(),
            mode,
            weights,
            segment_length: series.segment_length,
            frames: series.per_frame.len(),
            per_segment: series.per_segment.clone(),
            per_sequence: series.per_sequence,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: usize, start: u64) -> Vec<RawSkeleton> {
        (0..n)
            .map(|k| {
                let joints = (0..JOINT_COUNT)
                    .map(|j| [j as f64 * 0.1 + k as f64 / 3.0, -(j as f64) / 7.0, 2.5 + 1e-17 * k as f64])
                    .collect();
                RawSkeleton::new(start + k as u64, joints).unwrap()
            })
            .collect()
    }

    #[test]
    fn header_layout() {
        let h = sequence_header();
        assert!(h.starts_with("frame,j0x,j0y,j0z,j1x"));
        assert!(h.ends_with("j24x,j24y,j24z"));
        assert_eq!(h.split(',').count(), 76);
    }

    #[test]
    fn csv_round_trip() {
        let f = frames(5, 10);
        assert_eq!(parse_sequence_csv(&sequence_to_csv(&f)).unwrap(), f);
    }

    #[test]
    fn file_round_trip_and_count() {
        let dir = tempfile::tempdir().unwrap();
        let seq = GaitSequence {
            subject_id: "S07".into(),
            gait: GaitKind::SolePad { height_cm: 10.0 },
            frames: frames(1200, 0),
        };
        let path = dir.path().join("a.csv");
        write_sequence(&path, &seq).unwrap();
        let back = load_sequence(&path, "S07", seq.gait).unwrap();
        assert_eq!(back.frames.len(), 1200);
        assert_eq!(back, seq);
    }

    #[test]
    fn short_row_is_named() {
        let mut text = sequence_to_csv(&frames(3, 0));
        // Drop the last coordinate of the third data row (line 4).
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let cut = lines[3].rfind(',').unwrap();
        lines[3].truncate(cut);
        text = lines.join("\n");
        match parse_sequence_csv(&text).unwrap_err() {
            HarnessError::ColumnCount { line, found, .. } => {
                assert_eq!(line, 4);
                assert_eq!(found, 75);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn rows_with_74_coordinates_are_rejected() {
        let text = sequence_to_csv(&frames(2, 0));
        let trimmed: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| if i == 0 { l.to_string() } else { l[..l.rfind(',').unwrap()].to_string() })
            .collect::<Vec<_>>()
            .join("\n");
        let err = parse_sequence_csv(&trimmed).unwrap_err();
        assert!(matches!(err, HarnessError::ColumnCount { line: 2, found: 75, .. }));
        assert!(err.to_string().starts_with("line 2"));

        let header_only_trimmed: String = text
            .lines()
            .map(|l| l[..l.rfind(',').unwrap()].to_string())
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(
            parse_sequence_csv(&header_only_trimmed).unwrap_err(),
            HarnessError::ColumnCount { line: 1, found: 75, .. }
        ));
    }

    #[test]
    fn gaps_and_garbage_are_rejected() {
        let mut f = frames(3, 0);
        f[2].frame_index = 5;
        assert!(matches!(
            parse_sequence_csv(&sequence_to_csv(&f)).unwrap_err(),
            HarnessError::NonConsecutive { line: 4, expected: 2, found: 5 }
        ));
        let text = sequence_to_csv(&frames(2, 0)).replacen(",0.1,", ",abc,", 1);
        assert!(matches!(parse_sequence_csv(&text).unwrap_err(), HarnessError::Parse { line: 2, .. }));
        let text = sequence_to_csv(&frames(2, 0)).replacen(",0.1,", ",NaN,", 1);
        assert!(matches!(parse_sequence_csv(&text).unwrap_err(), HarnessError::Parse { line: 2, .. }));
        assert!(parse_sequence_csv(&sequence_header()).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let seqs = vec![
            GaitSequence { subject_id: "S01".into(), gait: GaitKind::Normal, frames: frames(4, 0) },
            GaitSequence { subject_id: "S01".into(), gait: GaitKind::AnkleWeight { kg: 4.0 }, frames: frames(4, 0) },
        ];
        let index = write_dataset(dir.path(), &seqs).unwrap();
        assert_eq!(index.sequences[1].file, "S01_ankle_weight_4kg.csv");
        assert_eq!(load_dataset(dir.path()).unwrap(), seqs);
    }

    #[test]
    fn sha_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
