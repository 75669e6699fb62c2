mod common;

use common::{naive_forward, random_frames, tiny_net};
use proptest::prelude::*;
use sast_core::event_data::FrameTensor;
use sast_core::linalg::Matrix;
use sast_core::snn::{forward, predict, LifLayer, NetworkParams, SpikeMode, SurrogateConfig};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check(seed: u64, hidden: &[usize], steps: usize, mode: SpikeMode) {
    let p = tiny_net(seed, 8, hidden, 3);
    let x = random_frames(seed, steps, 8);
    let tr = forward(&p, &x, mode).unwrap();
    let naive = naive_forward(&p, &x, mode);
    assert!(max_diff(&tr.logits, &naive.logits) <= 1e-12, "logits, seed {seed}");
    for (l, layer) in tr.layers.iter().enumerate() {
        for t in 0..steps {
            assert!(max_diff(layer.membrane_at(t), &naive.membrane[l][t]) <= 1e-12);
            assert!(max_diff(layer.spikes_at(t), &naive.spikes[l][t]) <= 1e-12);
        }
    }
}

#[test]
fn matches_naive_simulator_both_modes() {
    for seed in 0..20 {
        for mode in [SpikeMode::Surrogate, SpikeMode::Hard] {
            check(seed, &[6], 4, mode);
            check(seed, &[6, 5], 7, mode);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn matches_naive_simulator_random_shapes(seed in 0u64..10_000, h1 in 1usize..8, h2 in 0usize..6, steps in 1usize..9) {
        let hidden: Vec<usize> = if h2 == 0 { vec![h1] } else { vec![h1, h2] };
        check(seed, &hidden, steps, SpikeMode::Surrogate);
        check(seed, &hidden, steps, SpikeMode::Hard);
    }
}

fn single_neuron(w: f64, b: f64, theta: f64) -> NetworkParams<f64> {
    NetworkParams {
        layers: vec![LifLayer {
            weights: Matrix::from_vec(1, 1, vec![w]),
            bias: vec![b],
            threshold: vec![theta],
        }],
        readout_weights: Matrix::from_vec(1, 1, vec![1.0]),
        readout_bias: vec![0.0],
        alpha: 0.5,
        surrogate: SurrogateConfig::arctan(25.0),
    }
}

#[test]
fn one_step_closed_form() {
    // With T = 1 and zero initial state, u₁ = A·x + b and the rate is σ(u₁ − θ).
    let p = single_neuron(0.8, 0.1, 1.0);
    let x = FrameTensor::from_vec(1, 1, vec![0.5]).unwrap();
    let tr = forward(&p, &x, SpikeMode::Surrogate).unwrap();
    let u = 0.8 * 0.5 + 0.1;
    assert!((tr.layers[0].membrane[0] - u).abs() < 1e-15);
    let s = 0.5 + (25.0f64 * (u - 1.0)).atan() / std::f64::consts::PI;
    assert!((tr.logits[0] - s).abs() < 1e-15);
    let hard = forward(&p, &x, SpikeMode::Hard).unwrap();
    assert_eq!(hard.logits[0], 0.0);
}

#[test]
fn delayed_reset_and_boundary_firing() {
    // Drive 1.0 with θ = 1: fires at t=0 (equality), reset lands at t=1.
    let p = single_neuron(1.0, 0.0, 1.0);
    let x = FrameTensor::from_vec(3, 1, vec![1.0; 3]).unwrap();
    let tr = forward(&p, &x, SpikeMode::Hard).unwrap();
    assert_eq!(tr.layers[0].membrane, vec![1.0, 0.5, 1.25]);
    assert_eq!(tr.layers[0].spikes, vec![1.0, 0.0, 1.0]);
}

#[test]
fn step_surrogate_makes_modes_identical() {
    for seed in 0..10 {
        let mut p = tiny_net(seed, 8, &[6], 3);
        p.surrogate = SurrogateConfig::step();
        let x = random_frames(seed, 5, 8);
        let a = forward(&p, &x, SpikeMode::Surrogate).unwrap();
        let b = forward(&p, &x, SpikeMode::Hard).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(
            predict(&p, &x, SpikeMode::Surrogate).unwrap(),
            predict(&p, &x, SpikeMode::Hard).unwrap()
        );
    }
}

#[test]
fn f32_tracks_f64() {
    let p = tiny_net(3, 8, &[6], 3);
    let x = random_frames(3, 4, 8);
    let a = forward(&p, &x, SpikeMode::Surrogate).unwrap();
    let b = forward(&p.cast::<f32>(), &x.cast::<f32>(), SpikeMode::Surrogate).unwrap();
    for (u, v) in a.logits.iter().zip(&b.logits) {
        assert!((u - *v as f64).abs() < 1e-4);
    }
}

#[test]
fn input_shape_is_checked() {
    let p = tiny_net(0, 8, &[6], 3);
    let x = random_frames(0, 4, 7);
    assert!(forward(&p, &x, SpikeMode::Hard).is_err());
}
