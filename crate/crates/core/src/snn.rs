//! Leaky integrate-and-fire network: parameters, the arctan surrogate, and the
//! unrolled forward pass in surrogate or hard-spike mode.
//!
//! Per layer and step the membrane update is
//!
//! ```text
//! u_t = α·u_{t−1} + A·s_t^{in} + b − θ ⊙ s_{t−1}
//! s_t = σ(u_t − θ)         (surrogate)   or   H(u_t − θ)   (hard)
//! ```
//!
//! so a spike emitted at step `t` subtracts `θ` at step `t+1` (delayed reset).
//! Within one step, layer `ℓ` consumes layer `ℓ−1`'s spikes from the same step.
//! State starts at zero for every sequence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SastError};
use crate::event_data::FrameTensor;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// `σ(z) = 1/2 + atan(k·z)/π`.
    Arctan,
    /// Piecewise-constant step used to test mode equivalence; zero derivative.
    Step,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SurrogateConfig<S> {
    pub kind: SurrogateKind,
    /// Slope `k`; ignored by [`SurrogateKind::Step`].
    pub slope: S,
}

impl<S: Scalar> SurrogateConfig<S> {
    pub fn arctan(slope: S) -> Self {
        Self {
            kind: SurrogateKind::Arctan,
            slope,
        }
    }

    pub fn step() -> Self {
        Self {
            kind: SurrogateKind::Step,
            slope: S::one(),
        }
    }

    #[inline]
    pub fn value(&self, z: S) -> S {
        match self.kind {
            SurrogateKind::Arctan => S::lit(0.5) + (self.slope * z).atan() * S::FRAC_1_PI(),
            SurrogateKind::Step => heaviside(z),
        }
    }

    #[inline]
    pub fn deriv(&self, z: S) -> S {
        match self.kind {
            SurrogateKind::Arctan => {
                let kz = self.slope * z;
                self.slope * S::FRAC_1_PI() / (S::one() + kz * kz)
            }
            SurrogateKind::Step => S::zero(),
        }
    }

    #[inline]
    pub fn second_deriv(&self, z: S) -> S {
        match self.kind {
            SurrogateKind::Arctan => {
                let k = self.slope;
                let kz = k * z;
                let den = S::one() + kz * kz;
                -S::lit(2.0) * k * k * k * z * S::FRAC_1_PI() / (den * den)
            }
            SurrogateKind::Step => S::zero(),
        }
    }

    /// `sup_z |σ'(z)|`: `k/π` for the arctan surrogate.
    pub fn max_slope(&self) -> S {
        match self.kind {
            SurrogateKind::Arctan => self.slope * S::FRAC_1_PI(),
            SurrogateKind::Step => S::zero(),
        }
    }

    /// Largest `|σ'|` on the closed interval between `a` and `b`. The arctan
    /// slope is unimodal around 0, so this is an endpoint unless the interval
    /// straddles zero.
    pub fn max_slope_between(&self, a: S, b: S) -> S {
        if (a <= S::zero() && b >= S::zero()) || (b <= S::zero() && a >= S::zero()) {
            self.max_slope()
        } else {
            self.deriv(a).max(self.deriv(b))
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kind == SurrogateKind::Arctan && !(self.slope > S::zero() && self.slope.is_finite()) {
            return Err(SastError::invalid(format!(
                "surrogate slope must be positive, got {}",
                self.slope
            )));
        }
        Ok(())
    }
}

/// Heaviside step; fires at exact equality.
#[inline]
pub fn heaviside<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one()
    } else {
        S::zero()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeMode {
    /// Smooth surrogate nonlinearity in the forward pass (training).
    Surrogate,
    /// Heaviside spikes, everything else unchanged (swap-only deployment).
    Hard,
}

impl std::fmt::Display for SpikeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpikeMode::Surrogate => "surrogate",
            SpikeMode::Hard => "hard",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LifLayer<S> {
    /// `out_dim × in_dim`.
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
    /// Fixed firing thresholds, not trained.
    pub threshold: Vec<S>,
}

impl<S: Scalar> LifLayer<S> {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Layer widths `input → hidden… → classes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
}

impl Architecture {
    pub fn new(input: usize, hidden: Vec<usize>, classes: usize) -> Self {
        Self { input, hidden, classes }
    }

    /// Weights and biases of all layers plus the readout.
    pub fn learnable_count(&self) -> usize {
        let mut fan_in = self.input;
        let mut n = 0;
        for &h in &self.hidden {
            n += h * fan_in + h;
            fan_in = h;
        }
        n + self.classes * fan_in + self.classes
    }

    pub fn threshold_count(&self) -> usize {
        self.hidden.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct NetworkParams<S> {
    pub layers: Vec<LifLayer<S>>,
    /// `classes × last hidden width`.
    pub readout_weights: Matrix<S>,
    pub readout_bias: Vec<S>,
    /// Leak shared by every layer, in `(0, 1)`.
    pub alpha: S,
    pub surrogate: SurrogateConfig<S>,
}

impl<S: Scalar> NetworkParams<S> {
    /// Uniform `±1/√fan_in` weights, zero biases, constant thresholds.
    pub fn init<R: Rng + ?Sized>(
        arch: &Architecture,
        alpha: S,
        theta: S,
        surrogate: SurrogateConfig<S>,
        rng: &mut R,
    ) -> Result<Self> {
        if arch.hidden.is_empty() {
            return Err(SastError::invalid("at least one hidden layer is required"));
        }
        let mut uniform = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols as f64).sqrt();
            Matrix::from_fn(rows, cols, |_, _| S::lit(rng.random_range(-bound..bound)))
        };
        let mut layers = Vec::with_capacity(arch.hidden.len());
        let mut fan_in = arch.input;
        for &h in &arch.hidden {
            layers.push(LifLayer {
                weights: uniform(h, fan_in),
                bias: vec![S::zero(); h],
                threshold: vec![theta; h],
            });
            fan_in = h;
        }
        let params = Self {
            layers,
            readout_weights: uniform(arch.classes, fan_in),
            readout_bias: vec![S::zero(); arch.classes],
            alpha,
            surrogate,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(SastError::invalid("network has no layers"));
        }
        if !(self.alpha > S::zero() && self.alpha < S::one()) {
            return Err(SastError::invalid(format!("leak {} outside (0, 1)", self.alpha)));
        }
        self.surrogate.validate()?;
        let mut fan_in = self.layers[0].in_dim();
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim() != fan_in {
                return Err(SastError::shape(format!("layer {i} input width {fan_in}"), l.in_dim()));
            }
            if l.bias.len() != l.out_dim() || l.threshold.len() != l.out_dim() {
                return Err(SastError::shape(
                    format!("layer {i} bias/threshold length {}", l.out_dim()),
                    format!("{}/{}", l.bias.len(), l.threshold.len()),
                ));
            }
            if l.threshold.iter().any(|t| !(*t > S::zero())) {
                return Err(SastError::invalid(format!("layer {i} has a non-positive threshold")));
            }
            fan_in = l.out_dim();
        }
        if self.readout_weights.cols() != fan_in {
            return Err(SastError::shape(
                format!("readout input width {fan_in}"),
                self.readout_weights.cols(),
            ));
        }
        if self.readout_bias.len() != self.readout_weights.rows() {
            return Err(SastError::shape(
                format!("readout bias length {}", self.readout_weights.rows()),
                self.readout_bias.len(),
            ));
        }
        if self.learnable_slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(SastError::invalid("non-finite parameter"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.readout_weights.rows()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input: self.input_dim(),
            hidden: self.layers.iter().map(|l| l.out_dim()).collect(),
            classes: self.num_classes(),
        }
    }

    pub fn learnable_count(&self) -> usize {
        self.learnable_slices().iter().map(|s| s.len()).sum()
    }

    pub fn threshold_count(&self) -> usize {
        self.layers.iter().map(|l| l.threshold.len()).sum()
    }

    /// Learnable blocks in canonical order: per layer weights (row-major) then
    /// bias, then readout weights and readout bias.
    pub fn learnable_slices(&self) -> Vec<&[S]> {
        let mut v: Vec<&[S]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &self.layers {
            v.push(l.weights.as_slice());
            v.push(&l.bias);
        }
        v.push(self.readout_weights.as_slice());
        v.push(&self.readout_bias);
        v
    }

    pub fn learnable_slices_mut(&mut self) -> Vec<&mut [S]> {
        let mut v: Vec<&mut [S]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &mut self.layers {
            v.push(l.weights.as_mut_slice());
            v.push(&mut l.bias);
        }
        v.push(self.readout_weights.as_mut_slice());
        v.push(&mut self.readout_bias);
        v
    }

    pub fn flatten(&self) -> Vec<S> {
        self.learnable_slices().concat()
    }

    /// Overwrites the learnable parameters from a flat vector in canonical order.
    pub fn set_flat(&mut self, flat: &[S]) -> Result<()> {
        let n = self.learnable_count();
        if flat.len() != n {
            return Err(SastError::shape(n, flat.len()));
        }
        let mut off = 0;
        for s in self.learnable_slices_mut() {
            let len = s.len();
            s.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        Ok(())
    }

    /// `self + scale·direction`, with `direction` in canonical order.
    pub fn offset_by(&self, direction: &crate::bptt::Gradient<S>, scale: S) -> Self {
        let mut out = self.clone();
        for (p, d) in out.learnable_slices_mut().into_iter().zip(direction.slices()) {
            for (pi, di) in p.iter_mut().zip(d) {
                *pi += scale * *di;
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> NetworkParams<U> {
        let c = |v: &S| U::lit(v.to_f64_lossy());
        let m = |a: &Matrix<S>| Matrix::from_vec(a.rows(), a.cols(), a.as_slice().iter().map(c).collect());
        NetworkParams {
            layers: self
                .layers
                .iter()
                .map(|l| LifLayer {
                    weights: m(&l.weights),
                    bias: l.bias.iter().map(c).collect(),
                    threshold: l.threshold.iter().map(c).collect(),
                })
                .collect(),
            readout_weights: m(&self.readout_weights),
            readout_bias: self.readout_bias.iter().map(c).collect(),
            alpha: c(&self.alpha),
            surrogate: SurrogateConfig {
                kind: self.surrogate.kind,
                slope: c(&self.surrogate.slope),
            },
        }
    }
}

/// Per-layer membrane and previous-spike vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState<S> {
    pub membrane: Vec<Vec<S>>,
    pub spikes: Vec<Vec<S>>,
}

impl<S: Scalar> NetworkState<S> {
    pub fn zeros(params: &NetworkParams<S>) -> Self {
        let z = || params.layers.iter().map(|l| vec![S::zero(); l.out_dim()]).collect();
        Self {
            membrane: z(),
            spikes: z(),
        }
    }
}

#[inline]
fn spike<S: Scalar>(surrogate: &SurrogateConfig<S>, mode: SpikeMode, z: S) -> S {
    match mode {
        SpikeMode::Surrogate => surrogate.value(z),
        SpikeMode::Hard => heaviside(z),
    }
}

/// One LIF update; returns the new membrane and spikes.
pub fn step_layer<S: Scalar>(
    layer: &LifLayer<S>,
    alpha: S,
    surrogate: &SurrogateConfig<S>,
    mode: SpikeMode,
    membrane_prev: &[S],
    spikes_prev: &[S],
    input: &[S],
) -> Result<(Vec<S>, Vec<S>)> {
    let n = layer.out_dim();
    if membrane_prev.len() != n || spikes_prev.len() != n {
        return Err(SastError::shape(
            format!("state width {n}"),
            format!("{}/{}", membrane_prev.len(), spikes_prev.len()),
        ));
    }
    if input.len() != layer.in_dim() {
        return Err(SastError::shape(format!("input width {}", layer.in_dim()), input.len()));
    }
    let mut u = layer.weights.matvec(input);
    let mut s = vec![S::zero(); n];
    for i in 0..n {
        u[i] += alpha * membrane_prev[i] + layer.bias[i] - layer.threshold[i] * spikes_prev[i];
        s[i] = spike(surrogate, mode, u[i] - layer.threshold[i]);
    }
    Ok((u, s))
}

/// Membrane and spike history of one layer; both `T × width`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace<S> {
    pub width: usize,
    pub membrane: Vec<S>,
    pub spikes: Vec<S>,
    pub threshold: Vec<S>,
}

impl<S: Scalar> LayerTrace<S> {
    pub fn membrane_at(&self, t: usize) -> &[S] {
        &self.membrane[t * self.width..(t + 1) * self.width]
    }

    pub fn spikes_at(&self, t: usize) -> &[S] {
        &self.spikes[t * self.width..(t + 1) * self.width]
    }
}

/// Everything needed for exact backpropagation through one unrolled sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace<S> {
    pub mode: SpikeMode,
    pub steps: usize,
    pub input: FrameTensor<S>,
    pub layers: Vec<LayerTrace<S>>,
    /// `(1/T) Σ_t s_t` of the last layer.
    pub rate: Vec<S>,
    pub logits: Vec<S>,
}

impl<S: Scalar> ForwardTrace<S> {
    /// Spikes feeding layer `l` at step `t`.
    pub fn layer_input(&self, l: usize, t: usize) -> &[S] {
        if l == 0 {
            self.input.frame(t)
        } else {
            self.layers[l - 1].spikes_at(t)
        }
    }

    /// All `u − θ` values, ordered layer, step, neuron.
    pub fn membrane_margins(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.layers.iter().map(|l| l.membrane.len()).sum());
        for l in &self.layers {
            for t in 0..self.steps {
                out.extend(l.membrane_at(t).iter().zip(&l.threshold).map(|(u, th)| *u - *th));
            }
        }
        out
    }

    pub fn predicted_class(&self) -> usize {
        argmax(&self.logits)
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<S: Scalar>(v: &[S]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Unrolls the network over all frames from a zero state.
#[allow(clippy::needless_range_loop)]
pub fn forward<S: Scalar>(
    params: &NetworkParams<S>,
    frames: &FrameTensor<S>,
    mode: SpikeMode,
) -> Result<ForwardTrace<S>> {
    if frames.dim() != params.input_dim() {
        return Err(SastError::shape(
            format!("input dimension {}", params.input_dim()),
            frames.dim(),
        ));
    }
    let steps = frames.steps();
    let mut layers: Vec<LayerTrace<S>> = params
        .layers
        .iter()
        .map(|l| LayerTrace {
            width: l.out_dim(),
            membrane: vec![S::zero(); steps * l.out_dim()],
            spikes: vec![S::zero(); steps * l.out_dim()],
            threshold: l.threshold.clone(),
        })
        .collect();

    for t in 0..steps {
        for (li, layer) in params.layers.iter().enumerate() {
            let n = layer.out_dim();
            let (before, rest) = layers.split_at_mut(li);
            let cur = &mut rest[0];
            let input = if li == 0 {
                frames.frame(t)
            } else {
                before[li - 1].spikes_at(t)
            };
            let mut drive = vec![S::zero(); n];
            layer.weights.matvec_into(input, &mut drive);
            for i in 0..n {
                let mut v = drive[i] + layer.bias[i];
                if t > 0 {
                    let j = (t - 1) * n + i;
                    v += params.alpha * cur.membrane[j] - layer.threshold[i] * cur.spikes[j];
                }
                cur.membrane[t * n + i] = v;
                cur.spikes[t * n + i] = spike(&params.surrogate, mode, v - layer.threshold[i]);
            }
        }
    }

    let last = layers.last().expect("validated non-empty");
    let inv_t = S::one() / S::lit(steps.max(1) as f64);
    let mut rate = vec![S::zero(); last.width];
    for t in 0..steps {
        for (r, s) in rate.iter_mut().zip(last.spikes_at(t)) {
            *r += *s;
        }
    }
    for r in rate.iter_mut() {
        *r *= inv_t;
    }
    let mut logits = params.readout_weights.matvec(&rate);
    for (z, b) in logits.iter_mut().zip(&params.readout_bias) {
        *z += *b;
    }
    Ok(ForwardTrace {
        mode,
        steps,
        input: frames.clone(),
        layers,
        rate,
        logits,
    })
}

/// Logits only.
pub fn predict<S: Scalar>(params: &NetworkParams<S>, frames: &FrameTensor<S>, mode: SpikeMode) -> Result<usize> {
    Ok(forward(params, frames, mode)?.predicted_class())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn one_layer(alpha: f64, w: f64, b: f64, theta: f64) -> NetworkParams<f64> {
        NetworkParams {
            layers: vec![LifLayer {
                weights: Matrix::from_vec(1, 1, vec![w]),
                bias: vec![b],
                threshold: vec![theta],
            }],
            readout_weights: Matrix::from_vec(1, 1, vec![1.0]),
            readout_bias: vec![0.0],
            alpha,
            surrogate: SurrogateConfig::arctan(25.0),
        }
    }

    #[test]
    fn surrogate_basics() {
        let s = SurrogateConfig::arctan(25.0f64);
        assert_eq!(s.value(0.0), 0.5);
        assert!((s.deriv(0.0) - 25.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!((s.deriv(0.0) - 7.9577).abs() < 1e-3);
        for z in [-1.0, -0.1, 0.0, 0.1, 1.0] {
            let h = 1e-5;
            let fd = (s.value(z + h) - s.value(z - h)) / (2.0 * h);
            assert!(((s.deriv(z) - fd) / fd).abs() <= 1e-6, "z={z}");
            let fd2 = (s.deriv(z + h) - s.deriv(z - h)) / (2.0 * h);
            assert!((s.second_deriv(z) - fd2).abs() <= 1e-4 * (1.0 + fd2.abs()), "z={z}");
        }
    }

    #[test]
    fn max_slope_between_brackets_zero() {
        let s = SurrogateConfig::arctan(25.0f64);
        assert_eq!(s.max_slope_between(-0.1, 0.2), s.max_slope());
        assert_eq!(s.max_slope_between(0.3, 0.1), s.deriv(0.1));
        assert_eq!(s.max_slope_between(-0.3, -0.5), s.deriv(-0.3));
    }

    #[test]
    fn zero_dynamics_step() {
        let p = one_layer(0.5, 0.0, 0.0, 1.0);
        let sur = p.surrogate;
        let (u, s) = step_layer(&p.layers[0], 0.5, &sur, SpikeMode::Surrogate, &[0.0], &[0.0], &[0.0]).unwrap();
        assert_eq!(u, vec![0.0]);
        assert_eq!(s, vec![sur.value(-1.0)]);
        let (_, s) = step_layer(&p.layers[0], 0.5, &sur, SpikeMode::Hard, &[0.0], &[0.0], &[0.0]).unwrap();
        assert_eq!(s, vec![0.0]);
    }

    #[test]
    fn delayed_reset_step() {
        // A·input + b = 0.5 via bias only.
        let p = one_layer(0.5, 0.0, 0.5, 1.0);
        let sur = p.surrogate;
        let (u, s) = step_layer(&p.layers[0], 0.5, &sur, SpikeMode::Hard, &[2.0], &[1.0], &[0.0]).unwrap();
        assert_eq!((u, s), (vec![0.5], vec![0.0]));
        let (u, s) = step_layer(&p.layers[0], 0.5, &sur, SpikeMode::Hard, &[4.0], &[1.0], &[0.0]).unwrap();
        assert_eq!((u, s), (vec![1.5], vec![1.0]));
    }

    #[test]
    fn hard_fires_at_equality() {
        assert_eq!(heaviside(0.0f64), 1.0);
        assert_eq!(heaviside(-1e-300f64), 0.0);
    }

    #[test]
    fn step_layer_shape_errors() {
        let p = one_layer(0.5, 1.0, 0.0, 1.0);
        let sur = p.surrogate;
        assert!(step_layer(&p.layers[0], 0.5, &sur, SpikeMode::Hard, &[0.0, 0.0], &[0.0], &[0.0]).is_err());
        assert!(step_layer(&p.layers[0], 0.5, &sur, SpikeMode::Hard, &[0.0], &[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn forward_rejects_wrong_input() {
        let p = one_layer(0.5, 1.0, 0.0, 1.0);
        let f = FrameTensor::zeros(3, 2);
        assert!(matches!(forward(&p, &f, SpikeMode::Hard), Err(SastError::Shape { .. })));
    }

    #[test]
    fn parameter_counts_match_reported_architectures() {
        let a = Architecture::new(2312, vec![168, 64], 10);
        assert_eq!(a.learnable_count(), 400_050);
        assert_eq!(a.threshold_count(), 232);
        let b = Architecture::new(4608, vec![80, 336], 11);
        assert_eq!(b.learnable_count(), 399_643);
        assert_eq!(b.threshold_count(), 416);
    }

    #[test]
    fn init_bounds() {
        let arch = Architecture::new(16, vec![4], 3);
        let p = NetworkParams::<f64>::init(&arch, 0.5, 1.0, SurrogateConfig::arctan(25.0), &mut seeded(1)).unwrap();
        assert!(p.layers[0].weights.as_slice().iter().all(|w| w.abs() <= 0.25));
        assert!(p.layers[0].bias.iter().all(|b| *b == 0.0));
        assert_eq!(p.learnable_count(), arch.learnable_count());
        let mut q = p.clone();
        q.set_flat(&p.flatten()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn validate_catches_bad_leak_and_threshold() {
        let mut p = one_layer(0.5, 1.0, 0.0, 1.0);
        p.alpha = 1.0;
        assert!(p.validate().is_err());
        let mut p = one_layer(0.5, 1.0, 0.0, 1.0);
        p.layers[0].threshold[0] = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0f64, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0f64, 0.0]), 0);
    }
}
