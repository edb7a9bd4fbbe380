use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{objective, AxisModel, BatchStats, LossTerms, ModelError, Network, NetworkTopology, ParamSet};
use crate::skeleton::AxisVector;
use crate::AxisTag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Target mean activation of the sparse layer.
    pub rho: f64,
    pub sparsity_weight: f64,
    pub l2_weight: f64,
    pub learning_rate: f64,
    /// Classical momentum coefficient; 0 is plain SGD.
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rho: 0.05,
            sparsity_weight: 0.1,
            l2_weight: 1e-4,
            learning_rate: 1e-3,
            momentum: 0.0,
            batch_size: 64,
            epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::Config(msg.to_string()));
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie strictly inside (0, 1)");
        }
        if !(self.sparsity_weight >= 0.0 && self.sparsity_weight.is_finite()) {
            return bad("sparsity_weight must be a nonnegative number");
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad("l2_weight must be a nonnegative number");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("need at least {needed} training samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("training sample {index} is invalid: {reason}")]
    BadSample { index: usize, reason: String },
    #[error("training diverged at epoch {epoch}, batch {batch} (last good epoch: {last_good_epoch:?})")]
    Diverged {
        epoch: usize,
        batch: usize,
        last_good_epoch: Option<usize>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AxisModel,
    /// One entry per mini-batch, in update order.
    pub log: Vec<BatchStats>,
}

impl TrainOutcome {
    /// Mean total loss of each epoch's batches.
    pub fn epoch_means(&self) -> Vec<f64> {
        epoch_means(&self.log)
    }
}

pub fn epoch_means(log: &[BatchStats]) -> Vec<f64> {
    let mut means: Vec<(f64, usize)> = Vec::new();
    for s in log {
        if means.len() <= s.epoch {
            means.resize(s.epoch + 1, (0.0, 0));
        }
        means[s.epoch].0 += s.total_loss;
        means[s.epoch].1 += 1;
    }
    means.into_iter().map(|(sum, n)| sum / n.max(1) as f64).collect()
}

/// Trains the gait-topology auto-encoder for one axis on normal postures.
pub fn train(axis: AxisTag, samples: &[AxisVector], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let flat: Vec<f64> = samples.iter().flatten().copied().collect();
    let (network, log, mse) = train_network(&NetworkTopology::gait(), &flat, cfg)?;
    Ok(TrainOutcome {
        model: AxisModel {
            axis,
            network,
            train_mse: Some(mse),
            config: cfg.clone(),
        },
        log,
    })
}

/// Mini-batch gradient descent over row-major `samples`. Returns the final
/// network, the per-batch log, and the plain reconstruction MSE over the whole
/// training set at the final parameters.
pub fn train_network(
    topology: &NetworkTopology,
    samples: &[f64],
    cfg: &TrainConfig,
) -> Result<(Network, Vec<BatchStats>, f64), TrainError> {
    cfg.validate()?;
    let dim = topology.input_dim();
    if !samples.len().is_multiple_of(dim) {
        return Err(TrainError::BadSample {
            index: samples.len() / dim,
            reason: format!("row length is not {dim}"),
        });
    }
    let n = samples.len() / dim;
    if n < cfg.batch_size || n == 0 {
        return Err(TrainError::TooFewSamples {
            needed: cfg.batch_size.max(1),
            got: n,
        });
    }
    if let Some(pos) = samples.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(TrainError::BadSample {
            index: pos / dim,
            reason: format!("component {} = {} is outside [0, 1]", pos % dim, samples[pos]),
        });
    }

    let mut net = Network::init(topology, cfg.seed);
    let terms = LossTerms::from_config(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = ParamSet::zeros_like(&net);
    let mut velocity = ParamSet::zeros_like(&net);
    let mut buf = Vec::with_capacity(cfg.batch_size * dim);
    let mut log = Vec::with_capacity(cfg.epochs * n.div_ceil(cfg.batch_size));

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            buf.clear();
            for &i in idx {
                buf.extend_from_slice(&samples[i * dim..(i + 1) * dim]);
            }
            let diverged = || TrainError::Diverged {
                epoch,
                batch,
                last_good_epoch: epoch.checked_sub(1),
            };
            let o = match objective(&net, &buf, idx.len(), &terms, Some(&mut grad)) {
                Ok(o) => o,
                Err(ModelError::NonFinite { .. }) => return Err(diverged()),
                Err(e) => return Err(e.into()),
            };
            if grad.flatten().iter().any(|g| !g.is_finite()) {
                return Err(diverged());
            }
            log.push(BatchStats {
                epoch,
                batch,
                recon_loss: o.recon,
                kl_penalty: o.kl,
                l2_term: o.l2,
                total_loss: o.total,
            });
            step(&mut net, &grad, &mut velocity, cfg);
        }
    }

    let mse = net.reconstruction_mse(samples, n);
    if !mse.is_finite() {
        return Err(TrainError::Diverged {
            epoch: cfg.epochs,
            batch: 0,
            last_good_epoch: cfg.epochs.checked_sub(1),
        });
    }
    Ok((net, log, mse))
}

fn step(net: &mut Network, grad: &ParamSet, velocity: &mut ParamSet, cfg: &TrainConfig) {
    let lr = cfg.learning_rate;
    let mu = cfg.momentum;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
        let grads = grad.weights[l].iter().chain(&grad.biases[l]);
        let vel = velocity.weights[l].iter_mut().chain(velocity.biases[l].iter_mut());
        for ((p, g), v) in params.zip(grads).zip(vel) {
            if mu == 0.0 {
                *p -= lr * g;
            } else {
                *v = mu * *v - lr * g;
                *p += *v;
            }
        }
    }
}
