#![allow(clippy::needless_range_loop)]

mod common;

use common::{easy_split, random_frames, tiny_net, trained_net};
use rand::Rng;
use sast_core::event_data::FrameTensor;
use sast_core::hwsim::{
    fanout_table, hard_agreement, hw_evaluate, hw_forward, quantize_tensor, quantize_weights, FixedPointFormat,
    ProfileFile, QuantProfile, QuantizedNetwork, ResetTiming,
};
use sast_core::linalg::Matrix;
use sast_core::optim::Method;
use sast_core::rng::seeded;
use sast_core::snn::{LifLayer, NetworkParams, SurrogateConfig};

fn single(w: f64, theta: f64) -> NetworkParams<f64> {
    NetworkParams {
        layers: vec![LifLayer {
            weights: Matrix::from_vec(1, 1, vec![w]),
            bias: vec![0.0],
            threshold: vec![theta],
        }],
        readout_weights: Matrix::from_vec(1, 1, vec![1.0]),
        readout_bias: vec![0.0],
        alpha: 0.5,
        surrogate: SurrogateConfig::arctan(25.0),
    }
}

/// Scalar reset-by-subtraction recurrence in plain floating point.
fn scalar_trace(drive: f64, theta: f64, steps: usize) -> (Vec<f64>, usize) {
    let (mut u, mut spikes, mut pre) = (0.0, 0, Vec::new());
    for _ in 0..steps {
        u = 0.5 * u + drive;
        pre.push(u);
        if u >= theta {
            spikes += 1;
            u -= theta;
        }
    }
    (pre, spikes)
}

#[test]
fn constant_drive_trace_matches_hand_simulation() {
    let q = quantize_weights(&single(0.75, 1.0), &QuantProfile::loihi_like()).unwrap();
    let x = FrameTensor::from_vec(4, 1, vec![1.0; 4]).unwrap();
    let out = hw_forward(&q, &x).unwrap();
    let pre: Vec<f64> = out.margins.iter().map(|m| m + 1.0).collect();
    assert_eq!(pre, vec![0.75, 1.125, 0.8125, 1.15625]);
    assert_eq!(out.raster[0], vec![0, 1, 0, 1]);
    assert_eq!(out.spikes_per_layer, vec![2]);
    let (oracle, n) = scalar_trace(0.75, 1.0, 4);
    assert_eq!((pre, 2), (oracle, n));
    // Readout fan-out is one synapse per spike.
    assert_eq!(out.synops, 2);
}

#[test]
fn delayed_reset_matches_training_recurrence() {
    let mut p = QuantProfile::loihi_like();
    p.reset = ResetTiming::Delayed;
    let q = quantize_weights(&single(0.75, 1.0), &p).unwrap();
    let x = FrameTensor::from_vec(4, 1, vec![1.0; 4]).unwrap();
    let out = hw_forward(&q, &x).unwrap();
    assert_eq!(out.raster[0], vec![0, 1, 0, 0]);
    let pre: Vec<f64> = out.margins.iter().map(|m| m + 1.0).collect();
    assert_eq!(pre, vec![0.75, 1.125, 0.3125, 0.90625]);
}

/// Downstream in-degree of every presynaptic neuron, by walking weight entries.
fn brute_fanout(q: &QuantizedNetwork) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for l in 0..q.layers.len() {
        let next = if l + 1 < q.layers.len() {
            &q.layers[l + 1].weights
        } else {
            &q.readout
        };
        let mut f = vec![0u64; q.layers[l].weights.rows];
        for (k, _) in next.values.iter().enumerate() {
            f[k % next.cols] += 1;
        }
        out.push(f);
    }
    out
}

#[test]
fn synops_equal_brute_force_recount() {
    for seed in 0..20u64 {
        let hidden: &[usize] = if seed % 2 == 0 { &[6] } else { &[6, 4] };
        let p = tiny_net(seed, 8, hidden, 3);
        let q = quantize_weights(&p, &QuantProfile::loihi_like()).unwrap();
        let x = random_frames(seed, 6, 8);
        let out = hw_forward(&q, &x).unwrap();
        let fan = brute_fanout(&q);
        assert_eq!(fan, fanout_table(&q));
        let mut count = 0u64;
        for (l, layer) in q.layers.iter().enumerate() {
            let w = layer.weights.rows;
            for t in 0..6 {
                for n in 0..w {
                    count += out.raster[l][t * w + n] as u64 * fan[l][n];
                }
            }
            let pre = layer.weights.rows as u64;
            let post = if l + 1 < q.layers.len() {
                q.layers[l + 1].weights.rows
            } else {
                q.readout.rows
            } as u64;
            assert_eq!(fan[l].iter().sum::<u64>(), pre * post);
        }
        assert_eq!(out.synops, count, "seed {seed}");
        assert_eq!(hw_forward(&q, &x).unwrap().synops, out.synops);
    }
}

#[test]
fn six_to_three_fanout_counts_eighteen_per_step() {
    let mut p = tiny_net(0, 8, &[6], 3);
    p.layers[0].weights = Matrix::zeros(6, 8);
    p.layers[0].bias = vec![2.0; 6];
    let q = quantize_weights(&p, &QuantProfile::loihi_like()).unwrap();
    let out = hw_forward(&q, &random_frames(0, 1, 8)).unwrap();
    assert_eq!(out.spikes_per_layer, vec![6]);
    assert_eq!(out.synops, 18);
}

#[test]
fn silent_network_has_no_synops() {
    let mut p = tiny_net(1, 8, &[6], 3);
    p.layers[0].bias = vec![0.0; 6];
    p.readout_bias = vec![0.1, 0.3, 0.2];
    let q = quantize_weights(&p, &QuantProfile::aggressive()).unwrap();
    let zeros = FrameTensor::from_vec(5, 8, vec![0.0; 40]).unwrap();
    let out = hw_forward(&q, &zeros).unwrap();
    assert_eq!(out.synops, 0);
    assert_eq!(out.predicted, 1);
}

#[test]
fn quantization_round_trip_within_half_step() {
    let mut rng = seeded(77);
    for bits in [8u32, 4] {
        for _ in 0..100 {
            let (r, c) = (rng.random_range(1..9), rng.random_range(1..9));
            let spread: f64 = rng.random_range(0.01..10.0);
            let w: Vec<f64> = (0..r * c).map(|_| rng.random_range(-spread..spread)).collect();
            let q = quantize_tensor(r, c, &w, bits).unwrap();
            let lim: i32 = (1 << (bits - 1)) - 1;
            assert!(q.values.iter().all(|v| v.abs() <= lim));
            for (a, b) in q.dequantize().iter().zip(&w) {
                assert!((a - b).abs() <= q.scale / 2.0 + 1e-15 * b.abs());
            }
        }
    }
    let q = quantize_tensor(1, 3, &[-1.0, 0.0, 1.0], 8).unwrap();
    assert_eq!(q.values, vec![-127, 0, 127]);
    assert_eq!(q.scale, 1.0 / 127.0);
    let z = quantize_tensor(2, 2, &[0.0; 4], 4).unwrap();
    assert_eq!((z.values.clone(), z.scale), (vec![0; 4], 1.0));
    assert!(quantize_tensor(1, 1, &[f64::NAN], 8).is_err());
}

#[test]
fn half_leak_is_exact_on_even_raw_values() {
    let f = FixedPointFormat::Q8_8;
    let leak = QuantProfile::loihi_like().leak_raw(0.5);
    assert_eq!(leak, 128);
    for u in (f.min_raw()..=f.max_raw()).step_by(2) {
        assert_eq!(f.mul(leak, u), u / 2);
    }
}

#[test]
fn membrane_saturates_instead_of_wrapping() {
    let mut p = single(100.0, 1.0);
    p.layers[0].threshold = vec![7.5];
    let q = quantize_weights(&p, &QuantProfile::aggressive()).unwrap();
    let out = hw_forward(&q, &FrameTensor::from_vec(3, 1, vec![1.0; 3]).unwrap()).unwrap();
    let f = FixedPointFormat::Q4_4;
    for m in &out.margins {
        let u = m + 7.5;
        assert!(u <= f.max_value() && u >= f.min_value());
    }
}

#[test]
fn high_precision_profile_agrees_with_hard_inference() {
    let (_, val) = easy_split();
    let profile =
        ProfileFile::parse("name = \"q16\"\nweight_bits = 16\nint_bits = 16\nfrac_bits = 16\nreset = \"delayed\"\n")
            .unwrap();
    for method in [Method::Baseline, Method::Sast] {
        let p = trained_net(method, 1);
        let q = quantize_weights(&p, &profile).unwrap();
        let agree = hard_agreement(&q, &p, &val).unwrap();
        assert!(agree >= 0.99, "{method}: {agree}");
    }
}

#[test]
fn export_round_trip_is_bit_exact() {
    let q = quantize_weights(&tiny_net(2, 8, &[6, 4], 3), &QuantProfile::loihi_like()).unwrap();
    let back = QuantizedNetwork::from_json(&q.to_json().unwrap()).unwrap();
    assert_eq!(back, q);
    let mut bad = q.clone();
    bad.version = 99;
    assert!(QuantizedNetwork::from_json(&bad.to_json().unwrap()).is_err());
}

#[test]
fn duplicating_the_dataset_keeps_mean_synops() {
    let (_, val) = easy_split();
    let p = trained_net(Method::Baseline, 2);
    let q = quantize_weights(&p, &QuantProfile::loihi_like()).unwrap();
    let a = hw_evaluate(&q, &val, None).unwrap();
    let idx: Vec<usize> = (0..val.len()).chain(0..val.len()).collect();
    let b = hw_evaluate(&q, &val.subset(&idx), Some(a.ksynops)).unwrap();
    assert_eq!(a.mean_synops, b.mean_synops);
    assert_eq!(b.r_ops, Some(1.0));
}

#[test]
fn unknown_profiles_and_bad_formats_are_rejected() {
    assert!(QuantProfile::by_name("tpu").is_err());
    assert!(ProfileFile::parse("name = \"x\"\nweight_bits = 1\nint_bits = 8\nfrac_bits = 8\n").is_err());
    assert!(FixedPointFormat::new(0, 8).is_err());
}
