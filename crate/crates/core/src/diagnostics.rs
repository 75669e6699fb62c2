//! Numerical checks of the stability and smoothness theory: the contraction
//! proxy `γ̂ = α + M̂_θ·B̂₁`, the input-Lipschitz bound, the first-order
//! sharpness bound, the convergence floor and the near-threshold margin mass.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bptt::{batch_gradient, batch_loss, Gradient};
use crate::error::{Result, SastError};
use crate::event_data::{FrameTensor, LabeledDataset};
use crate::linalg::norm2;
use crate::optim::TrainRecord;
use crate::scalar::Scalar;
use crate::snn::{forward, ForwardTrace, NetworkParams, SpikeMode};

/// Where the largest surrogate slope was observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlopeLocation {
    pub sample: usize,
    pub layer: usize,
    pub step: usize,
    pub neuron: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `max |σ'(u − θ)|` over samples, layers, steps and neurons.
    pub b1_hat: f64,
    /// `max_ℓ ‖θ^(ℓ)‖_∞`.
    pub m_theta_hat: f64,
    pub alpha: f64,
    /// `α + M̂_θ·B̂₁`.
    pub gamma_hat: f64,
    pub contractive: bool,
    pub argmax: SlopeLocation,
    /// Analytic global slope bound `k/π`.
    pub b1_global: f64,
}

pub fn max_threshold<S: Scalar>(params: &NetworkParams<S>) -> S {
    params
        .layers
        .iter()
        .flat_map(|l| l.threshold.iter())
        .fold(S::zero(), |m, t| m.max(t.abs()))
}

fn trace_max_slope<S: Scalar>(params: &NetworkParams<S>, trace: &ForwardTrace<S>) -> (S, usize, usize, usize) {
    let mut best = (S::neg_infinity(), 0, 0, 0);
    for (l, lt) in trace.layers.iter().enumerate() {
        for t in 0..trace.steps {
            for (n, (u, th)) in lt.membrane_at(t).iter().zip(&lt.threshold).enumerate() {
                let d = params.surrogate.deriv(*u - *th).abs();
                if d > best.0 {
                    best = (d, l, t, n);
                }
            }
        }
    }
    best
}

/// Runs the surrogate forward pass over every sample and reports `γ̂`.
/// The arg-max is the first location (in sample, layer, step, neuron order)
/// attaining the maximum.
pub fn contraction_proxy<S: Scalar>(params: &NetworkParams<S>, data: &LabeledDataset<S>) -> Result<ContractionReport> {
    if data.is_empty() {
        return Err(SastError::invalid("contraction proxy needs at least one sample"));
    }
    let per_sample: Vec<(S, usize, usize, usize)> = data
        .samples()
        .par_iter()
        .map(|s| {
            Ok(trace_max_slope(
                params,
                &forward(params, &s.frames, SpikeMode::Surrogate)?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut best = (
        S::neg_infinity(),
        SlopeLocation {
            sample: 0,
            layer: 0,
            step: 0,
            neuron: 0,
        },
    );
    for (i, (d, l, t, n)) in per_sample.into_iter().enumerate() {
        if d > best.0 {
            best = (
                d,
                SlopeLocation {
                    sample: i,
                    layer: l,
                    step: t,
                    neuron: n,
                },
            );
        }
    }
    let b1 = best.0.max(S::zero()).to_f64_lossy();
    let m_theta = max_threshold(params).to_f64_lossy();
    let alpha = params.alpha.to_f64_lossy();
    let gamma = alpha + m_theta * b1;
    Ok(ContractionReport {
        b1_hat: b1,
        m_theta_hat: m_theta,
        alpha,
        gamma_hat: gamma,
        contractive: gamma < 1.0,
        argmax: best.1,
        b1_global: params.surrogate.max_slope().to_f64_lossy(),
    })
}

/// Geometric sum `S_T(γ) = Σ_{j<T} γ^j = (1 − γ^T)/(1 − γ)`, equal to `T` at `γ = 1`.
pub fn geometric_gain(gamma: f64, steps: usize) -> f64 {
    if (gamma - 1.0).abs() < 1e-12 {
        return steps as f64;
    }
    (1.0 - gamma.powi(steps as i32)) / (1.0 - gamma)
}

/// Constants entering the stability, Lipschitz and convergence statements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    /// `max_ℓ ‖A^(ℓ)‖₂` (measured).
    pub m_a: f64,
    /// `max_ℓ ‖θ^(ℓ)‖_∞` (measured).
    pub m_theta: f64,
    /// `‖W_out‖₂` (measured).
    pub m_out: f64,
    /// Local slope bound on the visited region (measured).
    pub b1_hat: f64,
    /// `k/π` (analytic).
    pub b1_global: f64,
    /// Local `max |σ''|` on the visited region (measured).
    pub b2_hat: f64,
    pub alpha: f64,
    pub steps: usize,
    pub layers: usize,
    /// Input bound; 1 per frame entry after normalization, so `‖x_t‖₂ ≤ √D`.
    pub r_x: f64,
}

impl TheoryConstants {
    pub fn gamma(&self) -> f64 {
        self.alpha + self.m_theta * self.b1_hat
    }
}

/// Operator norms from the parameters; slope constants are left at zero for
/// the caller to fill from visited states.
pub fn structural_constants<S: Scalar>(params: &NetworkParams<S>, steps: usize) -> TheoryConstants {
    TheoryConstants {
        m_a: params
            .layers
            .iter()
            .map(|l| l.weights.spectral_norm().to_f64_lossy())
            .fold(0.0, f64::max),
        m_theta: max_threshold(params).to_f64_lossy(),
        m_out: params.readout_weights.spectral_norm().to_f64_lossy(),
        b1_hat: 0.0,
        b1_global: params.surrogate.max_slope().to_f64_lossy(),
        b2_hat: 0.0,
        alpha: params.alpha.to_f64_lossy(),
        steps,
        layers: params.layers.len(),
        r_x: (params.input_dim() as f64).sqrt(),
    }
}

/// Measures all constants on one surrogate pass over `data`.
pub fn measure_constants<S: Scalar>(params: &NetworkParams<S>, data: &LabeledDataset<S>) -> Result<TheoryConstants> {
    let report = contraction_proxy(params, data)?;
    let steps = data.shape().map(|s| s.0).unwrap_or(0);
    let mut c = structural_constants(params, steps);
    c.b1_hat = report.b1_hat;
    let b2: Vec<f64> = data
        .samples()
        .par_iter()
        .map(|s| {
            let tr = forward(params, &s.frames, SpikeMode::Surrogate)?;
            Ok(tr
                .membrane_margins()
                .iter()
                .map(|z| params.surrogate.second_deriv(*z).abs().to_f64_lossy())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    c.b2_hat = b2.into_iter().fold(0.0, f64::max);
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBound {
    pub l_x: f64,
    pub gamma: f64,
    pub s_t: f64,
    /// `γ < 1`; the formula is still evaluated otherwise.
    pub contractive: bool,
}

/// `L_x = M_out·(B₁·M_A·S_T(γ))^L / √T`.
pub fn lipschitz_bound(c: &TheoryConstants) -> LipschitzBound {
    let gamma = c.gamma();
    let s_t = geometric_gain(gamma, c.steps);
    let l_x = c.m_out * (c.b1_hat * c.m_a * s_t).powi(c.layers as i32) / (c.steps.max(1) as f64).sqrt();
    LipschitzBound {
        l_x,
        gamma,
        s_t,
        contractive: gamma < 1.0,
    }
}

/// Largest `|σ'|` over the segments joining corresponding membrane offsets of
/// two traces. This bounds the slope everywhere on the straight path between
/// the two state trajectories.
pub fn segment_slope_bound<S: Scalar>(params: &NetworkParams<S>, a: &ForwardTrace<S>, b: &ForwardTrace<S>) -> S {
    let mut m = S::zero();
    for (la, lb) in a.layers.iter().zip(&b.layers) {
        for ((ua, ub), th) in la.membrane.iter().zip(&lb.membrane).zip(la.threshold.iter().cycle()) {
            m = m.max(params.surrogate.max_slope_between(*ua - *th, *ub - *th));
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProbe {
    pub sample: usize,
    pub input_distance: f64,
    pub output_distance: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProbeReport {
    pub constants: TheoryConstants,
    pub bound: LipschitzBound,
    pub probes: Vec<LipschitzProbe>,
    pub max_ratio: f64,
    pub violations: usize,
}

/// Draws `count` perturbation pairs `(x, x′)` with `x` from `data` and
/// `x′ = clamp(x + noise·N(0,1), 0, 1)`, measures `‖f(x) − f(x′)‖₂ / ‖x − x′‖₂,₂`
/// on the surrogate readout and compares with `L_x` built from constants
/// measured over the probed trajectories.
pub fn lipschitz_probe<S: Scalar, R: Rng + ?Sized>(
    params: &NetworkParams<S>,
    data: &LabeledDataset<S>,
    count: usize,
    noise: f64,
    rng: &mut R,
) -> Result<LipschitzProbeReport> {
    if data.is_empty() || count == 0 {
        return Err(SastError::invalid(
            "Lipschitz probe needs samples and at least one probe",
        ));
    }
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let i = rng.random_range(0..data.len());
        let x = &data.samples()[i].frames;
        let mut xp = x.clone();
        for v in xp.as_mut_slice() {
            let z: f64 = rng.sample(StandardNormal);
            *v = (*v + S::lit(noise * z)).max(S::zero()).min(S::one());
        }
        pairs.push((i, xp));
    }
    let measured: Vec<(LipschitzProbe, S)> = pairs
        .par_iter()
        .map(|(i, xp)| {
            let x: &FrameTensor<S> = &data.samples()[*i].frames;
            let a = forward(params, x, SpikeMode::Surrogate)?;
            let b = forward(params, xp, SpikeMode::Surrogate)?;
            let dx: Vec<S> = x.as_slice().iter().zip(xp.as_slice()).map(|(p, q)| *p - *q).collect();
            let dy: Vec<S> = a.logits.iter().zip(&b.logits).map(|(p, q)| *p - *q).collect();
            let din = norm2(&dx).to_f64_lossy();
            let dout = norm2(&dy).to_f64_lossy();
            Ok((
                LipschitzProbe {
                    sample: *i,
                    input_distance: din,
                    output_distance: dout,
                    ratio: if din > 0.0 { dout / din } else { 0.0 },
                },
                segment_slope_bound(params, &a, &b),
            ))
        })
        .collect::<Result<_>>()?;
    let steps = data.shape().map(|s| s.0).unwrap_or(0);
    let mut constants = structural_constants(params, steps);
    constants.b1_hat = measured.iter().map(|(_, b1)| b1.to_f64_lossy()).fold(0.0, f64::max);
    let bound = lipschitz_bound(&constants);
    let probes: Vec<LipschitzProbe> = measured.into_iter().map(|(p, _)| p).collect();
    let max_ratio = probes.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let violations = probes.iter().filter(|p| p.ratio > bound.l_x).count();
    Ok(LipschitzProbeReport {
        constants,
        bound,
        probes,
        max_ratio,
        violations,
    })
}

/// How the smoothness constant in [`sam_bound_check_flat`] is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaSource {
    /// Known smoothness constant.
    Given(f64),
    /// Max `|L(w+hd) − 2L(w) + L(w−hd)|/h²` over `directions` random unit `d`.
    Probe { directions: usize, step: f64 },
}

impl Default for BetaSource {
    fn default() -> Self {
        BetaSource::Probe {
            directions: 32,
            step: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamBoundReport {
    pub rho: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub beta_hat: f64,
    /// Largest loss over the probed perturbations.
    pub lhs_max: f64,
    /// `L(w) + ρ‖g‖₂ + β̂ρ²/2`.
    pub rhs: f64,
    pub satisfied: bool,
    /// Probe index of the worst perturbation (0 is the gradient direction).
    pub worst_probe: usize,
    /// Probes whose loss exceeded `rhs`.
    pub violating_probes: Vec<usize>,
}

fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Relative slack for floating-point rounding when a probe lands on the bound.
pub const BOUND_RTOL: f64 = 1e-12;

/// Checks `max_{‖ε‖≤ρ} L(w+ε) ≤ L(w) + ρ‖∇L(w)‖₂ + βρ²/2` on an arbitrary
/// objective over flat parameters. The probe set is the normalized gradient
/// direction plus `probes − 1` random directions, all scaled to norm `ρ`.
pub fn sam_bound_check_flat<F, R>(
    objective: F,
    w: &[f64],
    grad: &[f64],
    rho: f64,
    probes: usize,
    beta: BetaSource,
    rng: &mut R,
) -> Result<SamBoundReport>
where
    F: Fn(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    if probes == 0 {
        return Err(SastError::invalid("SAM bound check needs at least one probe"));
    }
    if rho < 0.0 {
        return Err(SastError::invalid("rho must be non-negative"));
    }
    let n = w.len();
    let shifted = |d: &[f64], s: f64| -> Vec<f64> { w.iter().zip(d).map(|(a, b)| a + s * b).collect() };
    let loss = objective(w)?;
    let grad_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    let beta_hat = match beta {
        BetaSource::Given(b) => b,
        BetaSource::Probe { directions, step } => {
            let mut b: f64 = 0.0;
            for _ in 0..directions {
                let d = random_unit(n, rng);
                let second = objective(&shifted(&d, step))? - 2.0 * loss + objective(&shifted(&d, -step))?;
                b = b.max((second / (step * step)).abs());
            }
            b
        }
    };
    let rhs = loss + rho * grad_norm + beta_hat * rho * rho / 2.0;
    let mut values = Vec::with_capacity(probes);
    for k in 0..probes {
        let d = if k == 0 && grad_norm > 0.0 {
            grad.iter().map(|g| g / grad_norm).collect()
        } else {
            random_unit(n, rng)
        };
        values.push(objective(&shifted(&d, rho))?);
    }
    let mut worst = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[worst] {
            worst = k;
        }
    }
    let lhs_max = values[worst].max(loss);
    let violating_probes: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > rhs + BOUND_RTOL * (1.0 + rhs.abs()))
        .map(|(k, _)| k)
        .collect();
    Ok(SamBoundReport {
        rho,
        loss,
        grad_norm,
        beta_hat,
        lhs_max,
        rhs,
        satisfied: violating_probes.is_empty(),
        worst_probe: worst,
        violating_probes,
    })
}

/// First-order sharpness bound on the surrogate loss of a network over `batch`.
pub fn sam_bound_check<S: Scalar, R: Rng + ?Sized>(
    params: &NetworkParams<S>,
    batch: &[(&FrameTensor<S>, usize)],
    rho: f64,
    probes: usize,
    beta: BetaSource,
    rng: &mut R,
) -> Result<SamBoundReport> {
    let (_, g) = batch_gradient(params, batch)?;
    let w: Vec<f64> = params.flatten().iter().map(|v| v.to_f64_lossy()).collect();
    let grad: Vec<f64> = g.flatten().iter().map(|v| v.to_f64_lossy()).collect();
    let objective = |flat: &[f64]| -> Result<f64> {
        let mut p = params.clone();
        let cast: Vec<S> = flat.iter().map(|v| S::lit(*v)).collect();
        p.set_flat(&cast)?;
        Ok(batch_loss(&p, batch)?.to_f64_lossy())
    };
    sam_bound_check_flat(objective, &w, &grad, rho, probes, beta, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    Assumed,
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceInputs {
    pub beta_hat: f64,
    pub rho: f64,
    pub eta: f64,
    /// Objective at the initial weights.
    pub initial_loss: f64,
    /// Lower bound on the optimal objective; 0 for cross-entropy.
    pub loss_star: f64,
    pub sigma_noise_sq: f64,
    pub noise_source: NoiseSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub steps: usize,
    /// `(1/K) Σ_k ‖g_k‖₂²` from the recorded minibatch gradients.
    pub mean_sq_grad_norm: f64,
    /// `4(L(w₀) − L*)/(ηK)`.
    pub optimization_term: f64,
    /// `3β²ρ²`.
    pub sharpness_floor: f64,
    /// `2ηβσ²`.
    pub noise_term: f64,
    pub rhs: f64,
    pub step_size_admissible: bool,
    pub noise_source: NoiseSource,
}

/// Observational comparison of the recorded gradient norms with the
/// stationarity bound; nothing is asserted.
pub fn convergence_monitor(record: &TrainRecord, c: &ConvergenceInputs) -> Result<ConvergenceReport> {
    let k = record.steps.len();
    if k == 0 {
        return Err(SastError::invalid("training record has no steps"));
    }
    let mean_sq = record.steps.iter().map(|s| s.grad_norm * s.grad_norm).sum::<f64>() / k as f64;
    Ok(convergence_rhs(k, mean_sq, c))
}

pub fn convergence_rhs(k: usize, mean_sq_grad_norm: f64, c: &ConvergenceInputs) -> ConvergenceReport {
    let optimization_term = 4.0 * (c.initial_loss - c.loss_star) / (c.eta * k as f64);
    let sharpness_floor = 3.0 * c.beta_hat * c.beta_hat * c.rho * c.rho;
    let noise_term = 2.0 * c.eta * c.beta_hat * c.sigma_noise_sq;
    ConvergenceReport {
        steps: k,
        mean_sq_grad_norm,
        optimization_term,
        sharpness_floor,
        noise_term,
        rhs: optimization_term + sharpness_floor + noise_term,
        step_size_admissible: c.eta <= 1.0 / (4.0 * c.beta_hat),
        noise_source: c.noise_source,
    }
}

/// Empirical minibatch-gradient variance `mean_B ‖g_B − ḡ‖²` over `batches`
/// random minibatches, `ḡ` being the full-data gradient.
pub fn estimate_gradient_noise<S: Scalar, R: Rng + ?Sized>(
    params: &NetworkParams<S>,
    data: &LabeledDataset<S>,
    batch_size: usize,
    batches: usize,
    rng: &mut R,
) -> Result<f64> {
    if data.is_empty() || batch_size == 0 || batches == 0 {
        return Err(SastError::invalid(
            "noise estimate needs data, a batch size and a batch count",
        ));
    }
    let all: Vec<(&FrameTensor<S>, usize)> = data.samples().iter().map(|s| (&s.frames, s.label)).collect();
    let (_, full) = batch_gradient(params, &all)?;
    let mut acc = 0.0;
    for _ in 0..batches {
        let b: Vec<(&FrameTensor<S>, usize)> = (0..batch_size).map(|_| all[rng.random_range(0..all.len())]).collect();
        let (_, g) = batch_gradient(params, &b)?;
        let mut diff: Gradient<S> = g;
        let mut neg = full.clone();
        neg.scale(-S::one());
        diff.add_assign(&neg);
        acc += diff.norm_sq().to_f64_lossy();
    }
    Ok(acc / batches as f64)
}

pub const HISTOGRAM_LO: f64 = -3.0;
pub const HISTOGRAM_HI: f64 = 3.0;
pub const HISTOGRAM_WIDTH: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub center: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub window: f64,
    pub count: usize,
    pub fraction_within: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Fixed histogram over `[−3, 3]` with bins of width 0.05; values outside land
/// in the end bins.
pub fn margin_histogram(margins: &[f64]) -> Vec<HistogramBin> {
    let bins = ((HISTOGRAM_HI - HISTOGRAM_LO) / HISTOGRAM_WIDTH).round() as usize;
    let mut counts = vec![0usize; bins];
    for m in margins {
        let idx = ((m - HISTOGRAM_LO) / HISTOGRAM_WIDTH).floor();
        let idx = if idx.is_nan() {
            0
        } else {
            (idx.max(0.0) as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    let total = margins.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, c)| HistogramBin {
            center: HISTOGRAM_LO + (i as f64 + 0.5) * HISTOGRAM_WIDTH,
            mass: *c as f64 / total,
        })
        .collect()
}

/// Hard-mode membrane margins `u − θ` over `data` and the fraction within
/// `±window` (window capped at 3).
pub fn margin_statistic<S: Scalar>(
    params: &NetworkParams<S>,
    data: &LabeledDataset<S>,
    window: f64,
) -> Result<MarginReport> {
    if !(window > 0.0) {
        return Err(SastError::invalid("margin window must be positive"));
    }
    let window = window.min(HISTOGRAM_HI);
    let per_sample: Vec<Vec<f64>> = data
        .samples()
        .par_iter()
        .map(|s| {
            let tr = forward(params, &s.frames, SpikeMode::Hard)?;
            Ok(tr.membrane_margins().iter().map(|m| m.to_f64_lossy()).collect())
        })
        .collect::<Result<_>>()?;
    let margins: Vec<f64> = per_sample.concat();
    let within = margins.iter().filter(|m| m.abs() <= window).count();
    Ok(MarginReport {
        window,
        count: margins.len(),
        fraction_within: if margins.is_empty() {
            0.0
        } else {
            within as f64 / margins.len() as f64
        },
        histogram: margin_histogram(&margins),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn geometric_gain_closed_form_matches_sum() {
        for i in 0..=999 {
            let g = i as f64 / 1000.0;
            for steps in [1usize, 4, 10] {
                let explicit: f64 = (0..steps).map(|j| g.powi(j as i32)).sum();
                assert!((geometric_gain(g, steps) - explicit).abs() <= 1e-12, "γ={g} T={steps}");
            }
        }
        assert_eq!(geometric_gain(1.0, 7), 7.0);
        assert_eq!(geometric_gain(0.0, 7), 1.0);
    }

    fn consts(m_out: f64, b1: f64, m_a: f64, gamma: f64, steps: usize, layers: usize) -> TheoryConstants {
        TheoryConstants {
            m_a,
            m_theta: 1.0,
            m_out,
            b1_hat: b1,
            b1_global: 25.0 / std::f64::consts::PI,
            b2_hat: 0.0,
            alpha: gamma - b1,
            steps,
            layers,
            r_x: 1.0,
        }
    }

    #[test]
    fn lipschitz_hand_values() {
        let b = lipschitz_bound(&consts(1.0, 0.5, 2.0, 0.5, 4, 2));
        assert!((b.s_t - 1.875).abs() < 1e-15);
        assert!((b.l_x - 1.7578125).abs() < 1e-12);
        // γ = 0: S_T = 1.
        let c = TheoryConstants {
            alpha: 0.0,
            b1_hat: 0.0,
            ..consts(2.0, 0.0, 3.0, 0.0, 9, 1)
        };
        let b = lipschitz_bound(&c);
        assert_eq!(b.s_t, 1.0);
        assert_eq!(b.l_x, 0.0);
    }

    #[test]
    fn lipschitz_monotone() {
        let base = consts(1.0, 0.3, 1.5, 0.8, 10, 2);
        let l0 = lipschitz_bound(&base).l_x;
        assert!(
            lipschitz_bound(&TheoryConstants {
                m_out: 1.1,
                ..base.clone()
            })
            .l_x > l0
        );
        assert!(
            lipschitz_bound(&TheoryConstants {
                m_a: 1.6,
                ..base.clone()
            })
            .l_x > l0
        );
        assert!(
            lipschitz_bound(&TheoryConstants {
                b1_hat: 0.31,
                ..base.clone()
            })
            .l_x > l0
        );
        assert!(
            lipschitz_bound(&TheoryConstants {
                alpha: 0.6,
                ..base.clone()
            })
            .l_x > l0
        );
    }

    #[test]
    fn convergence_plug_in() {
        let c = ConvergenceInputs {
            beta_hat: 10.0,
            rho: 0.3,
            eta: 1e-3,
            initial_loss: 2.3,
            loss_star: 0.0,
            sigma_noise_sq: 1.0,
            noise_source: NoiseSource::Assumed,
        };
        let r = convergence_rhs(1000, 0.0, &c);
        assert!((r.rhs - 36.22).abs() < 1e-9);
        assert!((r.sharpness_floor - 27.0).abs() < 1e-12);
        let r0 = convergence_rhs(1000, 0.0, &ConvergenceInputs { rho: 0.0, ..c });
        assert_eq!(r0.sharpness_floor, 0.0);
    }

    #[test]
    fn convergence_monitor_constant_gradient() {
        let mut rec = TrainRecord::default();
        for i in 0..10 {
            rec.steps.push(crate::optim::StepRecord {
                epoch: 0,
                step: i,
                loss: 1.0,
                grad_norm: 0.7,
                grad_evals: 1,
            });
        }
        let c = ConvergenceInputs {
            beta_hat: 1.0,
            rho: 0.0,
            eta: 0.1,
            initial_loss: 1.0,
            loss_star: 0.0,
            sigma_noise_sq: 0.0,
            noise_source: NoiseSource::Assumed,
        };
        let r = convergence_monitor(&rec, &c).unwrap();
        assert!((r.mean_sq_grad_norm - 0.49).abs() < 1e-15);
        assert!(convergence_monitor(&TrainRecord::default(), &c).is_err());
    }

    #[test]
    fn quadratic_oracle_is_tight_and_satisfied() {
        // L(w) = (c/2)‖w‖² is c-smooth; along the gradient the bound is an equality.
        let c = 3.0;
        let w = [0.4, -1.2, 0.7];
        let grad: Vec<f64> = w.iter().map(|x| c * x).collect();
        let obj = |v: &[f64]| -> Result<f64> { Ok(0.5 * c * v.iter().map(|x| x * x).sum::<f64>()) };
        for rho in [0.0, 0.05, 0.3, 1.0, 5.0] {
            let r = sam_bound_check_flat(obj, &w, &grad, rho, 16, BetaSource::Given(c), &mut seeded(3)).unwrap();
            assert!(r.satisfied, "rho={rho}");
            assert!((r.lhs_max - r.rhs).abs() <= 1e-12 * (1.0 + r.rhs), "rho={rho}");
            let p = sam_bound_check_flat(obj, &w, &grad, rho, 16, BetaSource::default(), &mut seeded(3)).unwrap();
            assert!((p.beta_hat - c).abs() < 1e-6);
            assert!(p.lhs_max <= p.rhs + 1e-9);
        }
    }

    #[test]
    fn anisotropic_quadratic_with_true_beta() {
        let h = [5.0, 0.5, 1.0];
        let w = [1.0, 1.0, -2.0];
        let grad: Vec<f64> = w.iter().zip(&h).map(|(x, k)| x * k).collect();
        let obj = |v: &[f64]| -> Result<f64> { Ok(0.5 * v.iter().zip(&h).map(|(x, k)| k * x * x).sum::<f64>()) };
        for rho in [0.1, 0.5, 2.0] {
            let r = sam_bound_check_flat(obj, &w, &grad, rho, 64, BetaSource::Given(5.0), &mut seeded(9)).unwrap();
            assert!(r.satisfied);
        }
    }

    #[test]
    fn histogram_clamps_and_sums_to_one() {
        let h = margin_histogram(&[-10.0, -3.0, 0.0, 0.049, 2.99, 3.0, 42.0]);
        assert_eq!(h.len(), 120);
        let total: f64 = h.iter().map(|b| b.mass).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        assert!((h[0].mass - 2.0 / 7.0).abs() < 1e-15);
        assert!((h[119].mass - 3.0 / 7.0).abs() < 1e-15);
        assert!((h[60].mass - 2.0 / 7.0).abs() < 1e-15);
    }
}
