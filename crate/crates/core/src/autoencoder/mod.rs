//! Per-axis sparse auto-encoder written against plain `f64` buffers.
//!
//! The objective for one mini-batch is
//!
//! ```text
//! total = recon + beta * kl + lambda * l2
//! recon = mean over rows and components of (output - input)^2
//! kl    = sum_j rho ln(rho / rho_hat_j) + (1 - rho) ln((1 - rho) / (1 - rho_hat_j))
//! l2    = sum of squared weights (biases excluded)
//! ```
//!
//! where `rho_hat_j` is the batch-mean activation of unit `j` in the first
//! (sigmoid) layer.

mod filters;
mod model_file;
mod network;
mod train;

pub use filters::{export_second_layer_filters, filters_from_csv, filters_to_csv, FilterImage, JointLayout};
pub use model_file::{ModelFile, MODEL_FORMAT_VERSION};
pub use network::{Activation, Layer, LayerSpec, Network, NetworkTopology, ParamSet};
pub use train::{epoch_means, train, train_network, TrainConfig, TrainError, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::AxisTag;

/// Clamp applied to batch-mean activations before taking logarithms.
pub const RHO_HAT_EPS: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: usize },
    #[error("input has {found} components, model expects {expected}")]
    InputWidth { expected: usize, found: usize },
    #[error("input component {index} = {value} is outside [0, 1]")]
    InputRange { index: usize, value: f64 },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("sparsity target rho = {0} must lie strictly inside (0, 1)")]
    BadRho(f64),
    #[error("mean activation rho_hat[{index}] = {value} is outside [0, 1]")]
    RhoHatRange { index: usize, value: f64 },
    #[error("model file: {0}")]
    Format(String),
}

/// A trained (or freshly initialized) auto-encoder bound to one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisModel {
    pub axis: AxisTag,
    pub network: Network,
    /// Plain reconstruction MSE over the training set; `None` until trained.
    pub train_mse: Option<f64>,
    pub config: TrainConfig,
}

impl AxisModel {
    pub fn is_trained(&self) -> bool {
        self.train_mse.is_some()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Forward, ModelError> {
        forward(&self.network, input)
    }

    /// Reconstruction MSE of a single axis vector.
    pub fn reconstruction_error(&self, input: &[f64]) -> Result<f64, ModelError> {
        let f = self.forward(input)?;
        Ok(network::mse(&f.output, input))
    }
}

/// Output of a single-sample forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub output: Vec<f64>,
    /// Output of every layer in order; the last entry equals `output`.
    pub activations: Vec<Vec<f64>>,
}

impl Forward {
    pub fn sparse_code(&self) -> &[f64] {
        &self.activations[0]
    }

    pub fn latent(&self, topology: &NetworkTopology) -> &[f64] {
        &self.activations[topology.latent_layer()]
    }
}

pub fn forward(net: &Network, input: &[f64]) -> Result<Forward, ModelError> {
    if input.len() != net.input_dim() {
        return Err(ModelError::InputWidth {
            expected: net.input_dim(),
            found: input.len(),
        });
    }
    if let Some((index, &value)) = input
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(ModelError::InputRange { index, value });
    }
    let mut acts = net.forward_batch(input, 1);
    acts.remove(0);
    if let Some(layer) = acts.iter().position(|a| a.iter().any(|v| !v.is_finite())) {
        return Err(ModelError::NonFinite { layer });
    }
    Ok(Forward {
        output: acts.last().unwrap().clone(),
        activations: acts,
    })
}

/// KL sparsity penalty between target `rho` and observed mean activations.
pub fn kl_sparsity(rho: f64, rho_hat: &[f64]) -> Result<f64, ModelError> {
    check_rho(rho)?;
    if let Some((index, &value)) = rho_hat
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(ModelError::RhoHatRange { index, value });
    }
    Ok(rho_hat.iter().map(|&r| kl_unit(rho, r)).sum())
}

fn check_rho(rho: f64) -> Result<(), ModelError> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(ModelError::BadRho(rho))
    }
}

#[inline]
fn kl_unit(rho: f64, rho_hat: f64) -> f64 {
    let r = rho_hat.clamp(RHO_HAT_EPS, 1.0 - RHO_HAT_EPS);
    rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln()
}

#[inline]
fn kl_unit_grad(rho: f64, rho_hat: f64) -> f64 {
    if !(RHO_HAT_EPS..=1.0 - RHO_HAT_EPS).contains(&rho_hat) {
        return 0.0;
    }
    -rho / rho_hat + (1.0 - rho) / (1.0 - rho_hat)
}

/// Loss breakdown for one mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub epoch: usize,
    pub batch: usize,
    pub recon_loss: f64,
    pub kl_penalty: f64,
    pub l2_term: f64,
    pub total_loss: f64,
}

/// Coefficients of the three objective terms. `recon` is 1 in training; the
/// gradient checks switch individual terms off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub recon: f64,
    pub sparsity: f64,
    pub l2: f64,
    pub rho: f64,
}

impl LossTerms {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        LossTerms {
            recon: 1.0,
            sparsity: cfg.sparsity_weight,
            l2: cfg.l2_weight,
            rho: cfg.rho,
        }
    }
}

/// Raw values of the objective terms plus their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub recon: f64,
    pub kl: f64,
    pub l2: f64,
    pub total: f64,
}

/// Evaluates the objective on a row-major batch and, when `grad` is given,
/// overwrites it with the analytic gradient.
pub fn objective(
    net: &Network,
    batch: &[f64],
    rows: usize,
    terms: &LossTerms,
    grad: Option<&mut ParamSet>,
) -> Result<Objective, ModelError> {
    if rows == 0 {
        return Err(ModelError::EmptyBatch);
    }
    check_rho(terms.rho)?;
    let d = net.input_dim();
    if batch.len() != rows * d {
        return Err(ModelError::InputWidth {
            expected: rows * d,
            found: batch.len(),
        });
    }
    let acts = net.forward_batch(batch, rows);
    let output = acts.last().unwrap();
    let recon = network::mse(output, batch);

    let sparse_dim = net.topology.sparse_dim();
    let mut rho_hat = vec![0.0; sparse_dim];
    for r in 0..rows {
        for (m, a) in rho_hat.iter_mut().zip(&acts[1][r * sparse_dim..(r + 1) * sparse_dim]) {
            *m += a;
        }
    }
    rho_hat.iter_mut().for_each(|m| *m /= rows as f64);
    let kl: f64 = rho_hat.iter().map(|&m| kl_unit(terms.rho, m)).sum();
    let l2 = net.l2();
    let total = terms.recon * recon + terms.sparsity * kl + terms.l2 * l2;
    if !total.is_finite() {
        let layer = acts
            .iter()
            .skip(1)
            .position(|a| a.iter().any(|v| !v.is_finite()))
            .unwrap_or(net.layers.len() - 1);
        return Err(ModelError::NonFinite { layer });
    }

    if let Some(grad) = grad {
        backprop(net, &acts, rows, terms, &rho_hat, grad);
    }
    Ok(Objective { recon, kl, l2, total })
}

fn backprop(
    net: &Network,
    acts: &[Vec<f64>],
    rows: usize,
    terms: &LossTerms,
    rho_hat: &[f64],
    grad: &mut ParamSet,
) {
    let n_layers = net.layers.len();
    let d = net.input_dim();
    let scale = terms.recon * 2.0 / (rows * d) as f64;
    // dL/d(output of the current layer)
    let mut g: Vec<f64> = acts[n_layers]
        .iter()
        .zip(&acts[0])
        .map(|(a, x)| scale * (a - x))
        .collect();

    for l in (0..n_layers).rev() {
        let layer = &net.layers[l];
        let (n_in, n_out) = (layer.spec.in_dim, layer.spec.out_dim);
        if l == 0 && terms.sparsity != 0.0 {
            let per_row: Vec<f64> = rho_hat
                .iter()
                .map(|&m| terms.sparsity * kl_unit_grad(terms.rho, m) / rows as f64)
                .collect();
            for r in 0..rows {
                for (gj, p) in g[r * n_out..(r + 1) * n_out].iter_mut().zip(&per_row) {
                    *gj += p;
                }
            }
        }
        let out = &acts[l + 1];
        let delta: Vec<f64> = g
            .iter()
            .zip(out)
            .map(|(gj, &a)| gj * layer.spec.activation.derivative_from_output(a))
            .collect();
        let input = &acts[l];
        let gw = &mut grad.weights[l];
        let gb = &mut grad.biases[l];
        for (w, gw) in layer.weights.iter().zip(gw.iter_mut()) {
            *gw = 2.0 * terms.l2 * w;
        }
        gb.fill(0.0);
        for r in 0..rows {
            let a = &input[r * n_in..(r + 1) * n_in];
            for j in 0..n_out {
                let dj = delta[r * n_out + j];
                if dj == 0.0 {
                    continue;
                }
                gb[j] += dj;
                for (gwi, ai) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(a) {
                    *gwi += dj * ai;
                }
            }
        }
        if l > 0 {
            let mut prev = vec![0.0; rows * n_in];
            for r in 0..rows {
                let p = &mut prev[r * n_in..(r + 1) * n_in];
                for j in 0..n_out {
                    let dj = delta[r * n_out + j];
                    if dj == 0.0 {
                        continue;
                    }
                    for (pi, wi) in p.iter_mut().zip(layer.row(j)) {
                        *pi += dj * wi;
                    }
                }
            }
            g = prev;
        }
    }
}

/// Objective of `batch` under `cfg`, reported as [`BatchStats`].
pub fn loss(net: &Network, batch: &[Vec<f64>], cfg: &TrainConfig) -> Result<BatchStats, ModelError> {
    let (flat, rows) = flatten_rows(net.input_dim(), batch)?;
    let o = objective(net, &flat, rows, &LossTerms::from_config(cfg), None)?;
    Ok(BatchStats {
        epoch: 0,
        batch: 0,
        recon_loss: o.recon,
        kl_penalty: o.kl,
        l2_term: o.l2,
        total_loss: o.total,
    })
}

/// Analytic gradient of the full objective under `cfg`.
pub fn backward(net: &Network, batch: &[Vec<f64>], cfg: &TrainConfig) -> Result<ParamSet, ModelError> {
    let (flat, rows) = flatten_rows(net.input_dim(), batch)?;
    let mut grad = ParamSet::zeros_like(net);
    objective(net, &flat, rows, &LossTerms::from_config(cfg), Some(&mut grad))?;
    Ok(grad)
}

pub(crate) fn flatten_rows(dim: usize, batch: &[Vec<f64>]) -> Result<(Vec<f64>, usize), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut flat = Vec::with_capacity(batch.len() * dim);
    for row in batch {
        if row.len() != dim {
            return Err(ModelError::InputWidth {
                expected: dim,
                found: row.len(),
            });
        }
        flat.extend_from_slice(row);
    }
    Ok((flat, batch.len()))
}
