//! Hardware-aware hard-spike inference: per-tensor symmetric weight
//! quantization, saturating Qm.n membrane arithmetic, a fixed-point leak,
//! reset by subtraction and synaptic-operation (SynOps) accounting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SastError};
use crate::event_data::{FrameTensor, LabeledDataset};
use crate::scalar::Scalar;
use crate::snn::{argmax, predict, NetworkParams, SpikeMode};

/// Signed fixed-point format with `int_bits` integer bits (sign included) and
/// `frac_bits` fraction bits. Range `[−2^(m−1), 2^(m−1) − 2^(−n)]`, step `2^(−n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointFormat {
    pub int_bits: u32,
    pub frac_bits: u32,
}

impl FixedPointFormat {
    pub fn new(int_bits: u32, frac_bits: u32) -> Result<Self> {
        if int_bits < 1 || int_bits + frac_bits > 48 {
            return Err(SastError::invalid(format!(
                "unsupported fixed-point format Q{int_bits}.{frac_bits}"
            )));
        }
        Ok(Self { int_bits, frac_bits })
    }

    pub const Q8_8: Self = Self {
        int_bits: 8,
        frac_bits: 8,
    };
    pub const Q4_4: Self = Self {
        int_bits: 4,
        frac_bits: 4,
    };
    pub const Q16_16: Self = Self {
        int_bits: 16,
        frac_bits: 16,
    };

    #[inline]
    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.int_bits - 1 + self.frac_bits)) - 1
    }

    #[inline]
    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.int_bits - 1 + self.frac_bits))
    }

    #[inline]
    pub fn one(&self) -> i64 {
        1i64 << self.frac_bits
    }

    pub fn resolution(&self) -> f64 {
        1.0 / self.one() as f64
    }

    pub fn min_value(&self) -> f64 {
        self.to_real(self.min_raw())
    }

    pub fn max_value(&self) -> f64 {
        self.to_real(self.max_raw())
    }

    #[inline]
    pub fn saturate(&self, raw: i128) -> i64 {
        raw.clamp(self.min_raw() as i128, self.max_raw() as i128) as i64
    }

    /// Nearest representable value (ties to even), saturated.
    pub fn from_real(&self, v: f64) -> i64 {
        if v.is_nan() {
            return 0;
        }
        let scaled = (v * self.one() as f64).round_ties_even();
        if scaled >= self.max_raw() as f64 {
            self.max_raw()
        } else if scaled <= self.min_raw() as f64 {
            self.min_raw()
        } else {
            scaled as i64
        }
    }

    #[inline]
    pub fn to_real(&self, raw: i64) -> f64 {
        raw as f64 / self.one() as f64
    }

    #[inline]
    pub fn add(&self, a: i64, b: i64) -> i64 {
        self.saturate(a as i128 + b as i128)
    }

    #[inline]
    pub fn sub(&self, a: i64, b: i64) -> i64 {
        self.saturate(a as i128 - b as i128)
    }

    /// Fixed-point product, rounded to nearest (ties to even) and saturated.
    pub fn mul(&self, a: i64, b: i64) -> i64 {
        let p = a as i128 * b as i128;
        let n = self.frac_bits;
        if n == 0 {
            return self.saturate(p);
        }
        let q = p >> n; // floor
        let rem = p - (q << n);
        let half = 1i128 << (n - 1);
        let rounded = if rem > half || (rem == half && q & 1 == 1) {
            q + 1
        } else {
            q
        };
        self.saturate(rounded)
    }
}

impl std::fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Q{}.{}", self.int_bits, self.frac_bits)
    }
}

/// When the threshold is subtracted after a spike.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetTiming {
    /// Subtract `θ` in the step the spike is emitted.
    Immediate,
    /// Subtract `θ` at the next step, as in the training dynamics.
    Delayed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantProfile {
    pub name: String,
    pub weight_bits: u32,
    pub membrane: FixedPointFormat,
    pub reset: ResetTiming,
}

impl QuantProfile {
    /// INT8 weights, Q8.8 membrane.
    pub fn loihi_like() -> Self {
        Self {
            name: "loihi_like".into(),
            weight_bits: 8,
            membrane: FixedPointFormat::Q8_8,
            reset: ResetTiming::Immediate,
        }
    }

    /// INT4 weights, Q4.4 membrane.
    pub fn aggressive() -> Self {
        Self {
            name: "aggressive".into(),
            weight_bits: 4,
            membrane: FixedPointFormat::Q4_4,
            reset: ResetTiming::Immediate,
        }
    }

    pub fn custom(name: &str, weight_bits: u32, membrane: FixedPointFormat, reset: ResetTiming) -> Result<Self> {
        let p = Self {
            name: name.into(),
            weight_bits,
            membrane,
            reset,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "loihi_like" => Ok(Self::loihi_like()),
            "aggressive" => Ok(Self::aggressive()),
            other => Err(SastError::invalid(format!(
                "unknown profile '{other}' (expected loihi_like, aggressive or a profile file)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=31).contains(&self.weight_bits) {
            return Err(SastError::invalid(format!(
                "weight_bits must be in [2, 31], got {}",
                self.weight_bits
            )));
        }
        FixedPointFormat::new(self.membrane.int_bits, self.membrane.frac_bits)?;
        Ok(())
    }

    /// Fixed-point leak factor in the membrane format.
    pub fn leak_raw(&self, alpha: f64) -> i64 {
        self.membrane.from_real(alpha)
    }
}

/// Flat key/value description of a custom profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub name: String,
    pub weight_bits: u32,
    pub int_bits: u32,
    pub frac_bits: u32,
    #[serde(default = "default_reset")]
    pub reset: ResetTiming,
}

fn default_reset() -> ResetTiming {
    ResetTiming::Immediate
}

impl ProfileFile {
    pub fn parse(text: &str) -> Result<QuantProfile> {
        let f: ProfileFile = toml::from_str(text).map_err(|e| SastError::invalid(format!("profile file: {e}")))?;
        QuantProfile::custom(
            &f.name,
            f.weight_bits,
            FixedPointFormat::new(f.int_bits, f.frac_bits)?,
            f.reset,
        )
    }
}

/// Integer tensor with one symmetric scale: `real ≈ value · scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantTensor {
    pub rows: usize,
    pub cols: usize,
    pub bits: u32,
    pub scale: f64,
    pub values: Vec<i32>,
}

impl QuantTensor {
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> i32 {
        self.values[r * self.cols + c]
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.values.iter().map(|v| *v as f64 * self.scale).collect()
    }
}

/// Symmetric per-tensor quantization: `scale = max|w|/(2^(b−1)−1)`, values
/// rounded half-to-even and clamped to `±(2^(b−1)−1)`. An all-zero tensor gets
/// scale 1.
pub fn quantize_tensor(rows: usize, cols: usize, data: &[f64], bits: u32) -> Result<QuantTensor> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(SastError::invalid("cannot quantize non-finite weights"));
    }
    let qmax = ((1i64 << (bits - 1)) - 1) as f64;
    let max_abs = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if max_abs == 0.0 { 1.0 } else { max_abs / qmax };
    let values = data
        .iter()
        .map(|w| (w / scale).round_ties_even().clamp(-qmax, qmax) as i32)
        .collect();
    Ok(QuantTensor {
        rows,
        cols,
        bits,
        scale,
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantLayer {
    pub weights: QuantTensor,
    /// Biases in the membrane format.
    pub bias: Vec<i64>,
    /// Thresholds in the membrane format.
    pub threshold: Vec<i64>,
}

pub const QNET_FORMAT: &str = "sast-quantized-network";
pub const QNET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedNetwork {
    pub format: String,
    pub version: u32,
    pub profile: QuantProfile,
    pub alpha: f64,
    pub leak: i64,
    pub layers: Vec<QuantLayer>,
    pub readout: QuantTensor,
    /// Readout bias, kept in double precision.
    pub readout_bias: Vec<f64>,
}

impl QuantizedNetwork {
    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols
    }

    pub fn num_classes(&self) -> usize {
        self.readout.rows
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let q: Self = serde_json::from_str(text)?;
        if q.format != QNET_FORMAT {
            return Err(SastError::Malformed(format!(
                "not a quantized network file ({})",
                q.format
            )));
        }
        if q.version != QNET_VERSION {
            return Err(SastError::Version {
                expected: QNET_VERSION,
                found: q.version,
            });
        }
        Ok(q)
    }
}

pub fn quantize_weights<S: Scalar>(params: &NetworkParams<S>, profile: &QuantProfile) -> Result<QuantizedNetwork> {
    profile.validate()?;
    let f = |v: &[S]| -> Vec<f64> { v.iter().map(|x| x.to_f64_lossy()).collect() };
    let fmt = profile.membrane;
    let mut layers = Vec::with_capacity(params.layers.len());
    for l in &params.layers {
        layers.push(QuantLayer {
            weights: quantize_tensor(l.out_dim(), l.in_dim(), &f(l.weights.as_slice()), profile.weight_bits)?,
            bias: f(&l.bias).iter().map(|b| fmt.from_real(*b)).collect(),
            threshold: f(&l.threshold).iter().map(|t| fmt.from_real(*t)).collect(),
        });
    }
    let readout_bias = f(&params.readout_bias);
    if readout_bias.iter().any(|v| !v.is_finite()) {
        return Err(SastError::invalid("cannot quantize non-finite readout bias"));
    }
    let alpha = params.alpha.to_f64_lossy();
    Ok(QuantizedNetwork {
        format: QNET_FORMAT.into(),
        version: QNET_VERSION,
        profile: profile.clone(),
        alpha,
        leak: profile.leak_raw(alpha),
        layers,
        readout: quantize_tensor(
            params.readout_weights.rows(),
            params.readout_weights.cols(),
            &f(params.readout_weights.as_slice()),
            profile.weight_bits,
        )?,
        readout_bias,
    })
}

/// Fan-out of every presynaptic hidden neuron: the number of synaptic
/// accumulations one of its spikes triggers downstream. Layer `ℓ` fans out into
/// layer `ℓ+1`, the last hidden layer into the readout.
pub fn fanout_table(qnet: &QuantizedNetwork) -> Vec<Vec<u64>> {
    (0..qnet.layers.len())
        .map(|l| {
            let next = if l + 1 < qnet.layers.len() {
                &qnet.layers[l + 1].weights
            } else {
                &qnet.readout
            };
            // Dense layers implement every (post, pre) synapse, zero or not.
            let mut fan = vec![0u64; next.cols];
            for _post in 0..next.rows {
                for f in fan.iter_mut() {
                    *f += 1;
                }
            }
            fan
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwOutput {
    pub predicted: usize,
    pub logits: Vec<f64>,
    pub synops: u64,
    /// Spikes emitted per hidden layer over the whole sequence.
    pub spikes_per_layer: Vec<u64>,
    /// Pre-reset `u − θ` per layer, step, neuron.
    pub margins: Vec<f64>,
    /// Binary spike raster per layer, `T × width`.
    pub raster: Vec<Vec<u8>>,
}

/// Fixed-point hard-spike inference on one sample.
///
/// Per step and layer: the synaptic current is summed in double precision in
/// presynaptic order from dequantized weights, rounded once into the membrane
/// format, and `u ← sat(sat(leak·u) + current) + bias` (each addition
/// saturating). A neuron spikes when `u ≥ θ`. Layer-0 inputs are the frames
/// rounded to the membrane format; only hidden-layer spikes count as SynOps.
pub fn hw_forward<S: Scalar>(qnet: &QuantizedNetwork, frames: &FrameTensor<S>) -> Result<HwOutput> {
    if frames.dim() != qnet.input_dim() {
        return Err(SastError::shape(
            format!("input dimension {}", qnet.input_dim()),
            frames.dim(),
        ));
    }
    let fmt = qnet.profile.membrane;
    let fanout = fanout_table(qnet);
    let steps = frames.steps();
    let mut membrane: Vec<Vec<i64>> = qnet.layers.iter().map(|l| vec![0; l.weights.rows]).collect();
    let mut prev_spikes: Vec<Vec<u8>> = qnet.layers.iter().map(|l| vec![0; l.weights.rows]).collect();
    let mut raster: Vec<Vec<u8>> = qnet
        .layers
        .iter()
        .map(|l| Vec::with_capacity(steps * l.weights.rows))
        .collect();
    let mut margins = Vec::with_capacity(steps * qnet.layers.iter().map(|l| l.weights.rows).sum::<usize>());
    let mut synops = 0u64;
    let mut spikes_per_layer = vec![0u64; qnet.layers.len()];
    let mut input: Vec<f64> = Vec::new();

    for t in 0..steps {
        input.clear();
        input.extend(
            frames
                .frame(t)
                .iter()
                .map(|v| fmt.to_real(fmt.from_real(v.to_f64_lossy()))),
        );
        for (l, layer) in qnet.layers.iter().enumerate() {
            let w = &layer.weights;
            let mut out = vec![0u8; w.rows];
            for i in 0..w.rows {
                let mut acc = 0.0f64;
                for (j, x) in input.iter().enumerate() {
                    if *x != 0.0 {
                        acc += w.get(i, j) as f64 * w.scale * x;
                    }
                }
                let current = fmt.from_real(acc);
                let mut u = fmt.mul(qnet.leak, membrane[l][i]);
                u = fmt.add(u, current);
                u = fmt.add(u, layer.bias[i]);
                if qnet.profile.reset == ResetTiming::Delayed && prev_spikes[l][i] == 1 {
                    u = fmt.sub(u, layer.threshold[i]);
                }
                let th = layer.threshold[i];
                margins.push(fmt.to_real(u) - fmt.to_real(th));
                if u >= th {
                    out[i] = 1;
                    if qnet.profile.reset == ResetTiming::Immediate {
                        u = fmt.sub(u, th);
                    }
                }
                debug_assert!(u >= fmt.min_raw() && u <= fmt.max_raw());
                membrane[l][i] = u;
            }
            for (n, s) in out.iter().enumerate() {
                if *s == 1 {
                    synops += fanout[l][n];
                    spikes_per_layer[l] += 1;
                }
            }
            raster[l].extend_from_slice(&out);
            input.clear();
            input.extend(out.iter().map(|s| *s as f64));
            prev_spikes[l] = out;
        }
    }

    let last = qnet.layers.len() - 1;
    let width = qnet.layers[last].weights.rows;
    let mut counts = vec![0u64; width];
    for t in 0..steps {
        for (c, s) in counts.iter_mut().zip(&raster[last][t * width..(t + 1) * width]) {
            *c += *s as u64;
        }
    }
    let inv_t = 1.0 / steps.max(1) as f64;
    let r = &qnet.readout;
    let logits: Vec<f64> = (0..r.rows)
        .map(|k| {
            let mut z = qnet.readout_bias[k];
            for (j, c) in counts.iter().enumerate() {
                z += r.get(k, j) as f64 * r.scale * (*c as f64 * inv_t);
            }
            z
        })
        .collect();
    Ok(HwOutput {
        predicted: argmax(&logits),
        logits,
        synops,
        spikes_per_layer,
        margins,
        raster,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwReport {
    pub profile: String,
    pub samples: usize,
    pub accuracy: f64,
    pub mean_synops: f64,
    /// `10⁻³ ×` mean SynOps per sample-sequence.
    pub ksynops: f64,
    /// `ksynops / reference`, when a reference is given.
    pub r_ops: Option<f64>,
}

pub fn hw_evaluate<S: Scalar>(
    qnet: &QuantizedNetwork,
    data: &LabeledDataset<S>,
    reference_ksynops: Option<f64>,
) -> Result<HwReport> {
    if data.is_empty() {
        return Err(SastError::invalid("cannot evaluate on an empty dataset"));
    }
    let outs: Vec<(bool, u64)> = data
        .samples()
        .par_iter()
        .map(|s| {
            let o = hw_forward(qnet, &s.frames)?;
            Ok((o.predicted == s.label, o.synops))
        })
        .collect::<Result<_>>()?;
    let n = data.len() as f64;
    let correct = outs.iter().filter(|o| o.0).count() as f64;
    let mean_synops = outs.iter().map(|o| o.1 as f64).sum::<f64>() / n;
    let ksynops = mean_synops * 1e-3;
    Ok(HwReport {
        profile: qnet.profile.name.clone(),
        samples: data.len(),
        accuracy: correct / n,
        mean_synops,
        ksynops,
        r_ops: reference_ksynops.map(|r| if r > 0.0 { ksynops / r } else { f64::NAN }),
    })
}

/// Fraction of samples on which fixed-point inference predicts the same class
/// as floating-point hard-spike inference of `params`.
pub fn hard_agreement<S: Scalar>(
    qnet: &QuantizedNetwork,
    params: &NetworkParams<S>,
    data: &LabeledDataset<S>,
) -> Result<f64> {
    if data.is_empty() {
        return Err(SastError::invalid("cannot evaluate on an empty dataset"));
    }
    let same: Vec<bool> = data
        .samples()
        .par_iter()
        .map(|s| Ok(hw_forward(qnet, &s.frames)?.predicted == predict(params, &s.frames, SpikeMode::Hard)?))
        .collect::<Result<_>>()?;
    Ok(same.iter().filter(|b| **b).count() as f64 / data.len() as f64)
}
