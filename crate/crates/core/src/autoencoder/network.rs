use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Chain of fully connected layers. The first layer's output is the sparse
/// code penalized by the KL term, the middle one is the latent code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    layers: Vec<LayerSpec>,
}

impl NetworkTopology {
    /// 17-128-32-8-32-128-17 with sigmoid at both ends and tanh inside.
    pub fn gait() -> Self {
        Self::from_dims(&[17, 128, 32, 8, 32, 128, 17]).expect("gait topology is valid")
    }

    /// Builds a topology with the gait activation pattern (sigmoid on the
    /// first and last layers, tanh elsewhere) over arbitrary widths.
    pub fn from_dims(dims: &[usize]) -> Result<Self, ModelError> {
        if dims.len() < 3 {
            return Err(ModelError::Topology("need at least two layers".into()));
        }
        let n = dims.len() - 1;
        let activations: Vec<Activation> = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    Activation::Sigmoid
                } else {
                    Activation::Tanh
                }
            })
            .collect();
        Self::new(dims, &activations)
    }

    pub fn new(dims: &[usize], activations: &[Activation]) -> Result<Self, ModelError> {
        if dims.len() < 3 || activations.len() + 1 != dims.len() {
            return Err(ModelError::Topology(format!(
                "{} widths do not fit {} activations",
                dims.len(),
                activations.len()
            )));
        }
        if dims.contains(&0) {
            return Err(ModelError::Topology("layer widths must be positive".into()));
        }
        if dims[0] != dims[dims.len() - 1] {
            return Err(ModelError::Topology("output width must equal input width".into()));
        }
        if activations[0] != Activation::Sigmoid {
            return Err(ModelError::Topology(
                "the sparse first layer needs a sigmoid so mean activations stay in (0, 1)".into(),
            ));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| LayerSpec {
                in_dim: w[0],
                out_dim: w[1],
                activation,
            })
            .collect();
        Ok(NetworkTopology { layers })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn sparse_dim(&self) -> usize {
        self.layers[0].out_dim
    }

    /// Index of the layer whose output is the bottleneck code.
    pub fn latent_layer(&self) -> usize {
        (self.layers.len() - 1) / 2
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.in_dim * l.out_dim).sum()
    }
}

/// Parameters of one dense layer; `weights` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(spec: LayerSpec) -> Self {
        Layer {
            spec,
            weights: vec![0.0; spec.in_dim * spec.out_dim],
            biases: vec![0.0; spec.out_dim],
        }
    }

    pub fn row(&self, out: usize) -> &[f64] {
        let n = self.spec.in_dim;
        &self.weights[out * n..(out + 1) * n]
    }

    /// Glorot-uniform bound for this layer's weights.
    pub fn init_bound(&self) -> f64 {
        (6.0 / (self.spec.in_dim + self.spec.out_dim) as f64).sqrt()
    }
}

/// Weight and bias arrays shaped like a [`Network`]; used for gradients and
/// momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ParamSet {
    pub fn zeros_like(net: &Network) -> Self {
        ParamSet {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        self.weights.iter_mut().for_each(|w| w.fill(0.0));
        self.biases.iter_mut().for_each(|b| b.fill(0.0));
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub topology: NetworkTopology,
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn zeros(topology: &NetworkTopology) -> Self {
        Network {
            topology: topology.clone(),
            layers: topology.layers().iter().map(|&s| Layer::zeros(s)).collect(),
        }
    }

    /// Glorot-uniform weights, zero biases; deterministic in `seed`.
    pub fn init(topology: &NetworkTopology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::zeros(topology);
        for layer in &mut net.layers {
            let bound = layer.init_bound();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.topology.input_dim()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = *it.next().expect("flat parameter vector too short");
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Sum of squared weights over all layers (biases excluded).
    pub fn l2(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    /// Runs a batch stored row-major (`rows x input_dim`) and returns every
    /// layer's activations, index 0 being the input itself.
    pub fn forward_batch(&self, input: &[f64], rows: usize) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let prev = acts.last().unwrap();
            let (n_in, n_out) = (layer.spec.in_dim, layer.spec.out_dim);
            let mut out = vec![0.0; rows * n_out];
            for r in 0..rows {
                let a = &prev[r * n_in..(r + 1) * n_in];
                let o = &mut out[r * n_out..(r + 1) * n_out];
                for (j, oj) in o.iter_mut().enumerate() {
                    let z = dot(layer.row(j), a) + layer.biases[j];
                    *oj = layer.spec.activation.apply(z);
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Mean over rows and components of the squared reconstruction error.
    pub fn reconstruction_mse(&self, input: &[f64], rows: usize) -> f64 {
        let acts = self.forward_batch(input, rows);
        mse(acts.last().unwrap(), input)
    }

    /// Per-row reconstruction MSE, one value per input row.
    pub fn row_errors(&self, input: &[f64], rows: usize) -> Vec<f64> {
        let acts = self.forward_batch(input, rows);
        let out = acts.last().unwrap();
        let d = self.input_dim();
        (0..rows)
            .map(|r| mse(&out[r * d..(r + 1) * d], &input[r * d..(r + 1) * d]))
            .collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn mse(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}
