//! Accuracy, transfer gap, seed aggregation, event-drop sweeps and the
//! compute-matched comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SastError};
use crate::event_data::{bin_events, drop_events, EventDataset, LabeledDataset};
use crate::optim::{Method, TrainRecord};
use crate::scalar::Scalar;
use crate::snn::{predict, NetworkParams, SpikeMode};

/// Fraction of samples whose argmax logit (lowest index on ties) equals the label.
pub fn accuracy<S: Scalar>(params: &NetworkParams<S>, data: &LabeledDataset<S>, mode: SpikeMode) -> Result<f64> {
    if data.is_empty() {
        return Err(SastError::invalid("cannot evaluate on an empty dataset"));
    }
    let correct: Vec<bool> = data
        .samples()
        .par_iter()
        .map(|s| Ok(predict(params, &s.frames, mode)? == s.label))
        .collect::<Result<_>>()?;
    Ok(correct.iter().filter(|c| **c).count() as f64 / data.len() as f64)
}

/// Mean and population standard deviation (divides by `n`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub acc_surrogate: f64,
    pub acc_hard: f64,
    /// `acc_surrogate − acc_hard`; negative when hard spikes do better.
    pub delta_transfer: f64,
}

impl EvalResult {
    pub fn new(acc_surrogate: f64, acc_hard: f64) -> Self {
        Self {
            acc_surrogate,
            acc_hard,
            delta_transfer: acc_surrogate - acc_hard,
        }
    }
}

/// Surrogate-forward and swap-only hard-spike accuracy on the same data.
pub fn transfer_gap<S: Scalar>(params: &NetworkParams<S>, data: &LabeledDataset<S>) -> Result<EvalResult> {
    Ok(EvalResult::new(
        accuracy(params, data, SpikeMode::Surrogate)?,
        accuracy(params, data, SpikeMode::Hard)?,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub seeds: Vec<u64>,
    pub per_seed: Vec<EvalResult>,
    pub mean_surrogate: f64,
    pub std_surrogate: f64,
    pub mean_hard: f64,
    pub std_hard: f64,
    pub mean_delta: f64,
    pub std_delta: f64,
    /// Always `"population"`.
    pub std_kind: String,
}

pub fn aggregate_seeds(seeds: &[u64], results: &[EvalResult]) -> SeedAggregate {
    let col = |f: fn(&EvalResult) -> f64| mean_std(&results.iter().map(f).collect::<Vec<_>>());
    let (ms, ss) = col(|r| r.acc_surrogate);
    let (mh, sh) = col(|r| r.acc_hard);
    let (md, sd) = col(|r| r.delta_transfer);
    SeedAggregate {
        seeds: seeds.to_vec(),
        per_seed: results.to_vec(),
        mean_surrogate: ms,
        std_surrogate: ss,
        mean_hard: mh,
        std_hard: sh,
        mean_delta: md,
        std_delta: sd,
        std_kind: "population".into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRow {
    pub p: f64,
    pub accuracy: f64,
}

/// For each drop probability: drop events (sample `i` uses seed `seed ^ i`),
/// re-bin, evaluate.
pub fn corruption_sweep<S: Scalar>(
    params: &NetworkParams<S>,
    data: &EventDataset,
    grid: &[f64],
    seed: u64,
    mode: SpikeMode,
    steps: usize,
) -> Result<Vec<CorruptionRow>> {
    if grid.is_empty() {
        return Err(SastError::invalid("corruption grid is empty"));
    }
    if data.is_empty() {
        return Err(SastError::invalid("cannot evaluate on an empty dataset"));
    }
    grid.iter()
        .map(|&p| {
            let correct: Vec<bool> = data
                .streams
                .par_iter()
                .enumerate()
                .map(|(i, (stream, label))| {
                    let dropped = drop_events(stream, p, seed ^ i as u64)?;
                    let frames = bin_events::<S>(&dropped, steps, data.width, data.height)?;
                    Ok(predict(params, &frames, mode)? == *label)
                })
                .collect::<Result<_>>()?;
            Ok(CorruptionRow {
                p,
                accuracy: correct.iter().filter(|c| **c).count() as f64 / data.len() as f64,
            })
        })
        .collect()
}

/// A finished training run as consumed by [`compute_matched_report`].
#[derive(Clone, Debug)]
pub struct RunSummary<'a, S> {
    pub method: Method,
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub record: &'a TrainRecord,
    pub checkpoint: &'a NetworkParams<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub grad_evals: u64,
    pub test: EvalResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Baseline spent at least the sharpness-aware run's gradient evaluations,
    /// up to one epoch's worth of slack.
    pub budget_matched: bool,
    pub note: String,
}

pub fn compute_matched_report<S: Scalar>(
    baseline: &RunSummary<'_, S>,
    sast: &RunSummary<'_, S>,
    test: &LabeledDataset<S>,
) -> Result<ComparisonReport> {
    let row = |r: &RunSummary<'_, S>| -> Result<ComparisonRow> {
        Ok(ComparisonRow {
            method: r.method,
            epochs: r.epochs,
            best_epoch: r.best_epoch,
            grad_evals: r.record.total_grad_evals(),
            test: transfer_gap(r.checkpoint, test)?,
        })
    };
    let b = row(baseline)?;
    let s = row(sast)?;
    let per_epoch = |r: &RunSummary<'_, S>| {
        if r.epochs == 0 {
            0
        } else {
            r.record.total_grad_evals() / r.epochs as u64
        }
    };
    let slack = per_epoch(baseline).max(per_epoch(sast));
    let budget_matched = b.grad_evals + slack >= s.grad_evals;
    let note = format!(
        "budgets in gradient evaluations: baseline {} vs sast {} (slack {slack})",
        b.grad_evals, s.grad_evals
    );
    Ok(ComparisonReport {
        rows: vec![b, s],
        budget_matched,
        note,
    })
}
