use serde::{Deserialize, Serialize};

use super::{Activation, AxisModel, Layer, ModelError, Network, NetworkTopology, TrainConfig};
use crate::skeleton::JointMask;
use crate::AxisTag;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyRecord {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

/// On-disk JSON form of an [`AxisModel`].
///
/// Floats are written in shortest round-trip form and parsed with correct
/// rounding, so save/load is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub axis_tag: AxisTag,
    /// Kinect joint indices feeding the 17 inputs, in input order.
    pub kept_joints: Vec<usize>,
    pub topology: TopologyRecord,
    /// Per layer, `out_dim` rows of `in_dim` weights.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub train_mse: Option<f64>,
    pub train_config: TrainConfig,
    pub seed: u64,
}

impl ModelFile {
    pub fn from_model(model: &AxisModel) -> Self {
        let topo = &model.network.topology;
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            axis_tag: model.axis,
            kept_joints: JointMask::default().kept().to_vec(),
            topology: TopologyRecord {
                dims: topo.dims(),
                activations: topo.activations(),
            },
            weights: model
                .network
                .layers
                .iter()
                .map(|l| l.weights.chunks(l.spec.in_dim).map(<[f64]>::to_vec).collect())
                .collect(),
            biases: model.network.layers.iter().map(|l| l.biases.clone()).collect(),
            train_mse: model.train_mse,
            train_config: model.config.clone(),
            seed: model.config.seed,
        }
    }

    pub fn into_model(self) -> Result<AxisModel, ModelError> {
        let fmt = |m: String| Err(ModelError::Format(m));
        if self.format_version != MODEL_FORMAT_VERSION {
            return fmt(format!(
                "unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            ));
        }
        if self.kept_joints != JointMask::default().kept() {
            return fmt("kept_joints does not match the standard 17-joint mask".into());
        }
        let topology = NetworkTopology::new(&self.topology.dims, &self.topology.activations)?;
        if self.weights.len() != topology.layers().len() || self.biases.len() != topology.layers().len() {
            return fmt("layer count does not match topology".into());
        }
        let mut layers = Vec::with_capacity(topology.layers().len());
        for (l, spec) in topology.layers().iter().enumerate() {
            let rows = &self.weights[l];
            if rows.len() != spec.out_dim || rows.iter().any(|r| r.len() != spec.in_dim) {
                return fmt(format!("layer {l} weight matrix is not {}x{}", spec.out_dim, spec.in_dim));
            }
            if self.biases[l].len() != spec.out_dim {
                return fmt(format!("layer {l} bias vector is not length {}", spec.out_dim));
            }
            layers.push(Layer {
                spec: *spec,
                weights: rows.iter().flatten().copied().collect(),
                biases: self.biases[l].clone(),
            });
        }
        let network = Network { topology, layers };
        if !network.all_finite() {
            return fmt("non-finite parameter".into());
        }
        if let Some(e) = self.train_mse {
            if !(e >= 0.0 && e.is_finite()) {
                return fmt(format!("train_mse {e} must be a nonnegative number"));
            }
        }
        if self.seed != self.train_config.seed {
            return fmt("seed disagrees with train_config.seed".into());
        }
        Ok(AxisModel {
            axis: self.axis_tag,
            network,
            train_mse: self.train_mse,
            config: self.train_config,
        })
    }
}

impl AxisModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_model(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<AxisModel, ModelError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        file.into_model()
    }
}
