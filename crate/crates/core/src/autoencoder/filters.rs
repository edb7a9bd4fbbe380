use serde::{Deserialize, Serialize};

use super::{AxisModel, ModelError};
use crate::skeleton::KEPT_JOINT_COUNT;

/// Pixel placement of the 17 kept joints, in kept-joint order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointLayout {
    pub width: usize,
    pub height: usize,
    /// `(column, row)` for each kept joint.
    pub positions: Vec<(usize, usize)>,
}

impl Default for JointLayout {
    /// A 7x9 front-view stick figure; the subject's right side is on the
    /// viewer's left.
    fn default() -> Self {
        JointLayout {
            width: 7,
            height: 9,
            positions: vec![
                (3, 3), // SpineBase
                (3, 0), // Head
                (5, 1), // ShoulderLeft
                (6, 2), // ElbowLeft
                (6, 4), // HandLeft
                (1, 1), // ShoulderRight
                (0, 2), // ElbowRight
                (0, 4), // HandRight
                (4, 4), // HipLeft
                (4, 6), // KneeLeft
                (4, 7), // AnkleLeft
                (5, 8), // FootLeft
                (2, 4), // HipRight
                (2, 6), // KneeRight
                (2, 7), // AnkleRight
                (1, 8), // FootRight
                (3, 1), // SpineShoulder
            ],
        }
    }
}

impl JointLayout {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.positions.len() != KEPT_JOINT_COUNT {
            return Err(ModelError::Format(format!(
                "layout places {} joints, expected {KEPT_JOINT_COUNT}",
                self.positions.len()
            )));
        }
        if self.positions.iter().any(|&(c, r)| c >= self.width || r >= self.height) {
            return Err(ModelError::Format("layout position outside the image".into()));
        }
        let mut seen = self.positions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.positions.len() {
            return Err(ModelError::Format("two joints share a pixel".into()));
        }
        Ok(())
    }
}

/// One first-layer unit rendered as a grayscale stick figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterImage {
    pub unit: usize,
    /// Incoming weights, one per kept joint.
    pub weights: Vec<f64>,
    pub width: usize,
    pub height: usize,
    /// Row-major gray levels; pixels without a joint are 0.
    pub pixels: Vec<u8>,
}

impl FilterImage {
    /// Binary PGM (P5), each pixel blown up to a `scale x scale` block.
    pub fn to_pgm(&self, scale: usize) -> Vec<u8> {
        let scale = scale.max(1);
        let (w, h) = (self.width * scale, self.height * scale);
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for row in 0..h {
            for col in 0..w {
                out.push(self.pixels[(row / scale) * self.width + col / scale]);
            }
        }
        out
    }
}

/// Renders every unit of the model's first (sparse) layer.
pub fn export_second_layer_filters(model: &AxisModel, layout: &JointLayout) -> Result<Vec<FilterImage>, ModelError> {
    layout.validate()?;
    let layer = &model.network.layers[0];
    if layer.spec.in_dim != KEPT_JOINT_COUNT {
        return Err(ModelError::InputWidth {
            expected: KEPT_JOINT_COUNT,
            found: layer.spec.in_dim,
        });
    }
    Ok((0..layer.spec.out_dim)
        .map(|unit| {
            let weights = layer.row(unit).to_vec();
            let (lo, hi) = weights
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| (a.min(w), b.max(w)));
            let mut pixels = vec![0u8; layout.width * layout.height];
            for (&w, &(c, r)) in weights.iter().zip(&layout.positions) {
                let level = if hi > lo {
                    (255.0 * (w - lo) / (hi - lo)).round() as u8
                } else {
                    128
                };
                pixels[r * layout.width + c] = level;
            }
            FilterImage {
                unit,
                weights,
                width: layout.width,
                height: layout.height,
                pixels,
            }
        })
        .collect())
}

/// `unit,w0,...,w16` rows with round-trip float formatting.
pub fn filters_to_csv(filters: &[FilterImage]) -> String {
    let mut out = String::from("unit");
    for j in 0..KEPT_JOINT_COUNT {
        out.push_str(&format!(",w{j}"));
    }
    out.push('\n');
    for f in filters {
        out.push_str(&f.unit.to_string());
        for w in &f.weights {
            out.push(',');
            out.push_str(&w.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn filters_from_csv(text: &str) -> Result<Vec<Vec<f64>>, ModelError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ModelError::Format(e.to_string()))?;
        let row = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|e| ModelError::Format(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::super::{Network, NetworkTopology, TrainConfig};
    use super::*;
    use crate::AxisTag;

    fn model() -> AxisModel {
        AxisModel {
            axis: AxisTag::X,
            network: Network::init(&NetworkTopology::gait(), 21),
            train_mse: Some(0.01),
            config: TrainConfig::default(),
        }
    }

    #[test]
    fn default_layout_is_valid() {
        JointLayout::default().validate().unwrap();
    }

    #[test]
    fn extremes_map_to_black_and_white() {
        let m = model();
        let layout = JointLayout::default();
        let filters = export_second_layer_filters(&m, &layout).unwrap();
        assert_eq!(filters.len(), 128);
        for f in &filters {
            let argmax = (0..17).max_by(|&a, &b| f.weights[a].total_cmp(&f.weights[b])).unwrap();
            let argmin = (0..17).min_by(|&a, &b| f.weights[a].total_cmp(&f.weights[b])).unwrap();
            let px = |j: usize| {
                let (c, r) = layout.positions[j];
                f.pixels[r * layout.width + c]
            };
            assert_eq!(px(argmax), 255);
            assert_eq!(px(argmin), 0);
        }
    }

    #[test]
    fn constant_unit_is_mid_gray() {
        let mut m = model();
        let layer = &mut m.network.layers[0];
        layer.weights[..17].fill(0.3);
        let layout = JointLayout::default();
        let f = &export_second_layer_filters(&m, &layout).unwrap()[0];
        for &(c, r) in &layout.positions {
            assert_eq!(f.pixels[r * layout.width + c], 128);
        }
    }

    #[test]
    fn csv_round_trip_matches_weights() {
        let m = model();
        let filters = export_second_layer_filters(&m, &JointLayout::default()).unwrap();
        let back = filters_from_csv(&filters_to_csv(&filters)).unwrap();
        let layer = &m.network.layers[0];
        for (unit, row) in back.iter().enumerate() {
            assert_eq!(row.as_slice(), layer.row(unit));
        }
    }

    #[test]
    fn pgm_header_and_size() {
        let f = &export_second_layer_filters(&model(), &JointLayout::default()).unwrap()[5];
        let pgm = f.to_pgm(4);
        let header = b"P5\n28 36\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(pgm.len(), header.len() + 28 * 36);
    }
}
