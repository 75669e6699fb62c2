//! Exact reverse-mode gradient of softmax cross-entropy through the unrolled
//! surrogate dynamics.
//!
//! Two recurrent paths carry gradient backwards in time: the leak
//! (`∂u_t/∂u_{t−1} = α`) and the delayed reset (`∂u_t/∂s_{t−1} = −θ`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SastError};
use crate::event_data::FrameTensor;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::snn::{forward, ForwardTrace, NetworkParams, SpikeMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LayerGradient<S> {
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
}

/// Gradient with respect to the learnable parameters; thresholds are fixed and
/// have no entry. Block order matches [`NetworkParams::learnable_slices`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Gradient<S> {
    pub layers: Vec<LayerGradient<S>>,
    pub readout_weights: Matrix<S>,
    pub readout_bias: Vec<S>,
}

impl<S: Scalar> Gradient<S> {
    pub fn zeros_like(params: &NetworkParams<S>) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![S::zero(); l.out_dim()],
                })
                .collect(),
            readout_weights: Matrix::zeros(params.readout_weights.rows(), params.readout_weights.cols()),
            readout_bias: vec![S::zero(); params.readout_bias.len()],
        }
    }

    pub fn slices(&self) -> Vec<&[S]> {
        let mut v: Vec<&[S]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &self.layers {
            v.push(l.weights.as_slice());
            v.push(&l.bias);
        }
        v.push(self.readout_weights.as_slice());
        v.push(&self.readout_bias);
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [S]> {
        let mut v: Vec<&mut [S]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &mut self.layers {
            v.push(l.weights.as_mut_slice());
            v.push(&mut l.bias);
        }
        v.push(self.readout_weights.as_mut_slice());
        v.push(&mut self.readout_bias);
        v
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<S> {
        self.slices().concat()
    }

    /// Builds a gradient shaped like `params` from a flat vector in canonical order.
    pub fn from_flat(params: &NetworkParams<S>, flat: &[S]) -> Result<Self> {
        let mut g = Self::zeros_like(params);
        if flat.len() != g.len() {
            return Err(SastError::shape(g.len(), flat.len()));
        }
        let mut off = 0;
        for s in g.slices_mut() {
            let n = s.len();
            s.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(g)
    }

    pub fn norm_sq(&self) -> S {
        self.slices().iter().map(|s| s.iter().map(|v| *v * *v).sum::<S>()).sum()
    }

    /// Euclidean norm of the flattened gradient.
    pub fn norm(&self) -> S {
        self.norm_sq().sqrt()
    }

    pub fn scale(&mut self, c: S) {
        for s in self.slices_mut() {
            for v in s {
                *v *= c;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn max_abs(&self) -> S {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(S::zero(), |m, v| m.max(v.abs()))
    }
}

/// Mean loss over a set of samples plus the per-sample values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LossValue<S> {
    pub value: S,
    pub per_sample: Vec<S>,
}

pub fn log_sum_exp<S: Scalar>(logits: &[S]) -> S {
    let m = logits.iter().copied().fold(S::neg_infinity(), S::max);
    m + logits.iter().map(|z| (*z - m).exp()).sum::<S>().ln()
}

pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|z| (*z - lse).exp()).collect()
}

/// `−log softmax(logits)[label]`.
pub fn cross_entropy<S: Scalar>(logits: &[S], label: usize) -> Result<S> {
    if label >= logits.len() {
        return Err(SastError::invalid(format!(
            "label {label} outside [0, {})",
            logits.len()
        )));
    }
    Ok(log_sum_exp(logits) - logits[label])
}

/// `∂ cross_entropy / ∂ logits = softmax − one_hot(label)`.
pub fn cross_entropy_grad<S: Scalar>(logits: &[S], label: usize) -> Result<Vec<S>> {
    if label >= logits.len() {
        return Err(SastError::invalid(format!(
            "label {label} outside [0, {})",
            logits.len()
        )));
    }
    let mut g = softmax(logits);
    g[label] -= S::one();
    Ok(g)
}

/// Loss and gradient for one surrogate-mode trace.
pub fn backward<S: Scalar>(
    trace: &ForwardTrace<S>,
    params: &NetworkParams<S>,
    label: usize,
) -> Result<(S, Gradient<S>)> {
    if trace.mode != SpikeMode::Surrogate {
        return Err(SastError::InvalidMode(
            "hard-spike traces have no usable gradient".into(),
        ));
    }
    let loss = cross_entropy(&trace.logits, label)?;
    let dlogits = cross_entropy_grad(&trace.logits, label)?;
    let mut grad = Gradient::zeros_like(params);

    grad.readout_weights.add_outer(&dlogits, &trace.rate);
    grad.readout_bias.copy_from_slice(&dlogits);
    let mut drate = vec![S::zero(); trace.rate.len()];
    params.readout_weights.add_transpose_matvec(&dlogits, &mut drate);
    let inv_t = S::one() / S::lit(trace.steps.max(1) as f64);
    for d in drate.iter_mut() {
        *d *= inv_t;
    }

    let nl = params.layers.len();
    // dL/du_{t+1} per layer, carried backwards in time.
    let mut du_next: Vec<Vec<S>> = params.layers.iter().map(|l| vec![S::zero(); l.out_dim()]).collect();
    let mut du_cur: Vec<Vec<S>> = du_next.clone();
    let mut ds = Vec::new();
    for t in (0..trace.steps).rev() {
        // Top layer first: layer ℓ's spikes at step t feed layer ℓ+1 at step t.
        for l in (0..nl).rev() {
            let layer = &params.layers[l];
            let lt = &trace.layers[l];
            let n = layer.out_dim();
            ds.clear();
            ds.resize(n, S::zero());
            if l + 1 == nl {
                ds.copy_from_slice(&drate);
            } else {
                params.layers[l + 1]
                    .weights
                    .add_transpose_matvec(&du_cur[l + 1], &mut ds);
            }
            let u = lt.membrane_at(t);
            let du = &mut du_cur[l];
            for i in 0..n {
                // Reset path: s_t enters u_{t+1} with coefficient −θ.
                let dsi = ds[i] - layer.threshold[i] * du_next[l][i];
                du[i] = dsi * params.surrogate.deriv(u[i] - layer.threshold[i]) + params.alpha * du_next[l][i];
            }
            let g = &mut grad.layers[l];
            g.weights.add_outer(du, trace.layer_input(l, t));
            for (b, d) in g.bias.iter_mut().zip(du.iter()) {
                *b += *d;
            }
        }
        std::mem::swap(&mut du_next, &mut du_cur);
    }
    Ok((loss, grad))
}

/// Forward in surrogate mode then backward.
pub fn sample_gradient<S: Scalar>(
    params: &NetworkParams<S>,
    frames: &FrameTensor<S>,
    label: usize,
) -> Result<(S, Gradient<S>)> {
    let trace = forward(params, frames, SpikeMode::Surrogate)?;
    backward(&trace, params, label)
}

/// Mean loss and gradient over a batch. Per-sample work runs in parallel; the
/// reduction is a sequential fold in batch order, so the result does not
/// depend on scheduling.
pub fn batch_gradient<S: Scalar>(
    params: &NetworkParams<S>,
    batch: &[(&FrameTensor<S>, usize)],
) -> Result<(LossValue<S>, Gradient<S>)> {
    if batch.is_empty() {
        return Err(SastError::invalid("empty batch"));
    }
    let parts: Vec<(S, Gradient<S>)> = batch
        .par_iter()
        .map(|(f, y)| sample_gradient(params, f, *y))
        .collect::<Result<_>>()?;
    let mut total = Gradient::zeros_like(params);
    let mut per_sample = Vec::with_capacity(parts.len());
    for (loss, g) in &parts {
        total.add_assign(g);
        per_sample.push(*loss);
    }
    let inv = S::one() / S::lit(batch.len() as f64);
    total.scale(inv);
    let value = per_sample.iter().copied().sum::<S>() * inv;
    Ok((LossValue { value, per_sample }, total))
}

/// Mean surrogate loss without gradients.
pub fn batch_loss<S: Scalar>(params: &NetworkParams<S>, batch: &[(&FrameTensor<S>, usize)]) -> Result<S> {
    if batch.is_empty() {
        return Err(SastError::invalid("empty batch"));
    }
    let losses: Vec<S> = batch
        .par_iter()
        .map(|(f, y)| cross_entropy(&forward(params, f, SpikeMode::Surrogate)?.logits, *y))
        .collect::<Result<_>>()?;
    Ok(losses.iter().copied().sum::<S>() / S::lit(batch.len() as f64))
}
