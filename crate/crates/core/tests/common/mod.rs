//! Shared fixtures: random tiny networks, random frames, and an independent
//! scalar-loop simulator used as an oracle.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use sast_core::event_data::FrameTensor;
use sast_core::linalg::Matrix;
use sast_core::rng::seeded;
use sast_core::snn::{LifLayer, NetworkParams, SpikeMode, SurrogateConfig};

/// Random network whose hidden units spike for inputs in `[0, 1]`.
pub fn tiny_net(seed: u64, input: usize, hidden: &[usize], classes: usize) -> NetworkParams<f64> {
    let mut rng = seeded(seed);
    let mut layers = Vec::new();
    let mut fan_in = input;
    for &h in hidden {
        let scale = 2.5 / (fan_in as f64).sqrt();
        layers.push(LifLayer {
            weights: Matrix::from_fn(h, fan_in, |_, _| rng.random_range(-0.5 * scale..scale)),
            bias: (0..h).map(|_| rng.random_range(-0.2..0.3)).collect(),
            threshold: (0..h).map(|_| rng.random_range(0.8..1.2)).collect(),
        });
        fan_in = h;
    }
    NetworkParams {
        layers,
        readout_weights: Matrix::from_fn(classes, fan_in, |_, _| rng.random_range(-1.0..1.0)),
        readout_bias: (0..classes).map(|_| rng.random_range(-0.1..0.1)).collect(),
        alpha: 0.5,
        surrogate: SurrogateConfig::arctan(25.0),
    }
}

pub fn random_frames(seed: u64, steps: usize, dim: usize) -> FrameTensor<f64> {
    let mut rng = seeded(seed ^ 0xF00D);
    FrameTensor::from_vec(steps, dim, (0..steps * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Output of [`naive_forward`].
pub struct NaiveTrace {
    pub logits: Vec<f64>,
    /// `[layer][t][neuron]` membrane values.
    pub membrane: Vec<Vec<Vec<f64>>>,
    /// `[layer][t][neuron]` spike values.
    pub spikes: Vec<Vec<Vec<f64>>>,
}

/// Straight transcription of the recurrence with explicit loops:
/// `u_t = α·u_{t−1} + Σ_j A_ij·x_j + b_i − θ_i·s_{t−1,i}`, `s_t = σ(u_t − θ)` or `H(u_t − θ)`.
pub fn naive_forward(p: &NetworkParams<f64>, x: &FrameTensor<f64>, mode: SpikeMode) -> NaiveTrace {
    let steps = x.steps();
    let k = p.surrogate.slope;
    let nonlin = |z: f64| match mode {
        SpikeMode::Surrogate => 0.5 + (k * z).atan() / std::f64::consts::PI,
        SpikeMode::Hard => {
            if z >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
    };
    let mut membrane: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut spikes: Vec<Vec<Vec<f64>>> = Vec::new();
    for (l, layer) in p.layers.iter().enumerate() {
        let n = layer.bias.len();
        let mut mu = vec![vec![0.0; n]; steps];
        let mut sp = vec![vec![0.0; n]; steps];
        for t in 0..steps {
            for i in 0..n {
                let mut drive = 0.0;
                for j in 0..layer.weights.cols() {
                    let input = if l == 0 { x.frame(t)[j] } else { spikes[l - 1][t][j] };
                    drive += layer.weights.get(i, j) * input;
                }
                let (u_prev, s_prev) = if t == 0 {
                    (0.0, 0.0)
                } else {
                    (mu[t - 1][i], sp[t - 1][i])
                };
                mu[t][i] = p.alpha * u_prev + drive + layer.bias[i] - layer.threshold[i] * s_prev;
                sp[t][i] = nonlin(mu[t][i] - layer.threshold[i]);
            }
        }
        membrane.push(mu);
        spikes.push(sp);
    }
    let last = spikes.last().unwrap();
    let width = last[0].len();
    let mut logits = p.readout_bias.clone();
    for c in 0..logits.len() {
        for j in 0..width {
            let rate: f64 = (0..steps).map(|t| last[t][j]).sum::<f64>() / steps as f64;
            logits[c] += p.readout_weights.get(c, j) * rate;
        }
    }
    NaiveTrace {
        logits,
        membrane,
        spikes,
    }
}

/// Softmax cross-entropy of the naive simulator.
pub fn naive_loss(p: &NetworkParams<f64>, x: &FrameTensor<f64>, label: usize) -> f64 {
    let z = naive_forward(p, x, SpikeMode::Surrogate).logits;
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - z[label]
}

/// Easy two-class synthetic task: 45 training and 15 validation samples per class.
pub fn easy_split() -> (sast_core::Dataset, sast_core::Dataset) {
    use sast_core::event_data::{make_synthetic_dataset, SyntheticSpec};
    let spec = SyntheticSpec {
        classes: 2,
        samples_per_class: 60,
        seed: 3,
        ..SyntheticSpec::default()
    };
    let all = make_synthetic_dataset::<f64>(&spec, 10).unwrap();
    let train: Vec<usize> = (0..120).filter(|i| i % 60 < 45).collect();
    let val: Vec<usize> = (0..120).filter(|i| i % 60 >= 45).collect();
    (all.subset(&train), all.subset(&val))
}

/// Network with one hidden layer of 16 trained on [`easy_split`].
pub fn trained_net(method: sast_core::optim::Method, seed: u64) -> NetworkParams<f64> {
    use sast_core::optim::{train, AdamConfig, SamConfig, TrainConfig};
    use sast_core::rng::{stream_rng, Stream};
    use sast_core::snn::Architecture;
    let (tr, va) = easy_split();
    let init = NetworkParams::init(
        &Architecture::new(128, vec![16], 2),
        0.5,
        1.0,
        SurrogateConfig::arctan(25.0),
        &mut stream_rng(seed, Stream::Init),
    )
    .unwrap();
    let cfg = TrainConfig {
        method,
        sam: SamConfig::new(0.1),
        adam: AdamConfig {
            lr: 5e-3,
            ..AdamConfig::default()
        },
        epochs: 10,
        batch_size: 16,
        seed,
    };
    train(init, &tr, &va, &cfg).unwrap().best
}
