//! Glue between a [`RunConfig`] and the training, evaluation and sweep
//! routines. Shared by the command-line tool and the test suites.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataConfig, DataKind, ModelConfig, RunConfig, TrainSection};
use crate::diagnostics::{contraction_proxy, margin_statistic};
use crate::error::{Result, SastError};
use crate::eval::{
    aggregate_seeds, compute_matched_report, corruption_sweep, mean_std, transfer_gap, ComparisonReport, CorruptionRow,
    EvalResult, RunSummary, SeedAggregate,
};
use crate::event_data::{generate_synthetic_streams, load_event_dataset, EventDataset, LabeledDataset};
use crate::optim::{compute_matched_epochs, train, AdamConfig, Method, SamConfig, TrainConfig, TrainOutcome};
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;
use crate::snn::{Architecture, NetworkParams, SpikeMode, SurrogateConfig};

/// Event-level and binned train/validation/test splits.
#[derive(Clone, Debug)]
pub struct Splits<S> {
    pub steps: usize,
    pub train_events: EventDataset,
    pub val_events: EventDataset,
    pub test_events: EventDataset,
    pub train: LabeledDataset<S>,
    pub val: LabeledDataset<S>,
    pub test: LabeledDataset<S>,
}

impl<S: Scalar> Splits<S> {
    fn from_events(steps: usize, train: EventDataset, val: EventDataset, test: EventDataset) -> Result<Self> {
        Ok(Self {
            steps,
            train: train.bin(steps)?,
            val: val.bin(steps)?,
            test: test.bin(steps)?,
            train_events: train,
            val_events: val,
            test_events: test,
        })
    }

    pub fn input_dim(&self) -> usize {
        2 * self.train_events.width as usize * self.train_events.height as usize
    }

    pub fn num_classes(&self) -> usize {
        self.train_events.num_classes
    }
}

/// Builds the splits described by `cfg`. Synthetic data is split per class in
/// generation order; directory data carves a stratified validation split from
/// the training root using `split_seed`.
pub fn prepare_splits<S: Scalar>(cfg: &DataConfig) -> Result<Splits<S>> {
    match cfg.kind {
        DataKind::Synthetic => {
            let per_class = cfg.train_per_class + cfg.val_per_class + cfg.test_per_class;
            let mut spec = cfg.synthetic.clone();
            spec.samples_per_class = per_class;
            let all = generate_synthetic_streams(&spec)?;
            let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
            for (i, _) in all.streams.iter().enumerate() {
                let k = i % per_class;
                if k < cfg.train_per_class {
                    tr.push(i);
                } else if k < cfg.train_per_class + cfg.val_per_class {
                    va.push(i);
                } else {
                    te.push(i);
                }
            }
            Splits::from_events(cfg.steps, all.subset(&tr), all.subset(&va), all.subset(&te))
        }
        DataKind::Directory => {
            let train_root = cfg
                .train_path
                .as_ref()
                .ok_or_else(|| SastError::invalid("field `data.train_path`: required for directory datasets"))?;
            let test_root = cfg
                .test_path
                .as_ref()
                .ok_or_else(|| SastError::invalid("field `data.test_path`: required for directory datasets"))?;
            let all = load_event_dataset(train_root)?;
            let test = load_event_dataset(test_root)?;
            if (test.width, test.height, test.num_classes) != (all.width, all.height, all.num_classes) {
                return Err(SastError::invalid(
                    "test dataset sensor size or class count differs from training",
                ));
            }
            let (tr, va) = stratified_split(&all, cfg.val_fraction, cfg.max_train_samples, cfg.split_seed);
            Splits::from_events(cfg.steps, all.subset(&tr), all.subset(&va), test)
        }
    }
}

/// Per class: shuffle, send `ceil(fraction·n)` samples (at least one) to
/// validation, keep the rest for training, then optionally cap the training size.
fn stratified_split(data: &EventDataset, fraction: f64, max_train: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream_rng(seed, Stream::Data);
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for c in 0..data.num_classes {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.streams[i].1 == c).collect();
        idx.shuffle(&mut rng);
        let nv = ((idx.len() as f64 * fraction).ceil() as usize).clamp(usize::from(idx.len() > 1), idx.len());
        va.extend_from_slice(&idx[..nv]);
        tr.extend_from_slice(&idx[nv..]);
    }
    if max_train > 0 && tr.len() > max_train {
        tr.shuffle(&mut rng);
        tr.truncate(max_train);
    }
    tr.sort_unstable();
    va.sort_unstable();
    (tr, va)
}

pub fn architecture(model: &ModelConfig, input: usize, classes: usize) -> Architecture {
    Architecture {
        input,
        hidden: model.hidden.clone(),
        classes,
    }
}

/// Initial parameters for `seed`, drawn from the initialisation stream.
pub fn init_params<S: Scalar>(model: &ModelConfig, arch: &Architecture, seed: u64) -> Result<NetworkParams<S>> {
    NetworkParams::init(
        arch,
        S::lit(model.alpha),
        S::lit(model.theta),
        SurrogateConfig::arctan(S::lit(model.slope)),
        &mut stream_rng(seed, Stream::Init),
    )
}

/// Epoch count for `method`: baseline runs get the matched budget when
/// `compute_matched` is set.
pub fn epochs_for(train: &TrainSection, method: Method) -> usize {
    match method {
        Method::Baseline if train.compute_matched => compute_matched_epochs(train.epochs),
        _ => train.epochs,
    }
}

pub fn train_config<S: Scalar>(train: &TrainSection, method: Method, rho: f64, seed: u64) -> TrainConfig<S> {
    let mut sam = SamConfig::new(S::lit(rho));
    sam.delta = S::lit(train.delta);
    TrainConfig {
        method,
        sam,
        adam: AdamConfig {
            lr: S::lit(train.lr),
            beta1: S::lit(train.beta1),
            beta2: S::lit(train.beta2),
            eps: S::lit(train.eps),
        },
        epochs: epochs_for(train, method),
        batch_size: train.batch_size,
        seed,
    }
}

/// Trains one model on the splits for `seed`.
pub fn run_seed<S: Scalar>(
    cfg: &RunConfig,
    splits: &Splits<S>,
    method: Method,
    rho: f64,
    seed: u64,
) -> Result<TrainOutcome<S>> {
    let arch = architecture(&cfg.model, splits.input_dim(), splits.num_classes());
    let init = init_params(&cfg.model, &arch, seed)?;
    train(
        init,
        &splits.train,
        &splits.val,
        &train_config(&cfg.train, method, rho, seed),
    )
}

/// Drop probabilities of the event-drop sweep.
pub const CORRUPTION_GRID: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];
/// Half-width of the near-threshold margin window.
pub const MARGIN_WINDOW: f64 = 0.2;

/// Test-set metrics of one trained model at its selected checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub method: Method,
    pub rho: f64,
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub grad_evals: u64,
    pub val_acc_hard: f64,
    pub test: EvalResult,
    /// Hard-spike accuracy per drop probability in [`CORRUPTION_GRID`].
    pub corruption: Vec<CorruptionRow>,
    /// Clean minus `p = 0.4` hard-spike accuracy.
    pub corruption_drop: f64,
    pub margin_fraction: f64,
    pub gamma_hat: f64,
}

/// A trained model together with its report.
#[derive(Clone, Debug)]
pub struct TrainedModel<S> {
    pub report: ModelReport,
    pub outcome: TrainOutcome<S>,
}

/// Seed-mean summary of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub rho: f64,
    pub test: SeedAggregate,
    pub mean_corruption_drop: f64,
    pub mean_margin_fraction: f64,
    pub mean_gamma_hat: f64,
}

#[derive(Clone, Debug)]
pub struct Comparison<S> {
    /// Validation sweep over the ρ grid; empty when the grid has one entry.
    pub sweep: Vec<(f64, f64)>,
    pub best_rho: f64,
    pub baseline: Vec<TrainedModel<S>>,
    pub sast: Vec<TrainedModel<S>>,
    pub matched: Vec<ComparisonReport>,
    pub baseline_summary: MethodSummary,
    pub sast_summary: MethodSummary,
}

fn corruption_seed(seed: u64) -> u64 {
    stream_rng(seed, Stream::Corruption).random()
}

/// Test-set report for a finished run. Only this function touches the test split.
pub fn report_model<S: Scalar>(
    splits: &Splits<S>,
    method: Method,
    rho: f64,
    seed: u64,
    outcome: &TrainOutcome<S>,
) -> Result<ModelReport> {
    let best = &outcome.best;
    let corruption = corruption_sweep(
        best,
        &splits.test_events,
        &CORRUPTION_GRID,
        corruption_seed(seed),
        SpikeMode::Hard,
        splits.steps,
    )?;
    let drop = corruption[0].accuracy - corruption[corruption.len() - 1].accuracy;
    let val_acc_hard = outcome
        .best_epoch
        .and_then(|e| outcome.record.epochs.get(e - 1))
        .map(|e| e.val_acc_hard)
        .unwrap_or(f64::NAN);
    Ok(ModelReport {
        method,
        rho,
        seed,
        epochs: outcome.record.epochs.len(),
        best_epoch: outcome.best_epoch,
        grad_evals: outcome.record.total_grad_evals(),
        val_acc_hard,
        test: transfer_gap(best, &splits.test)?,
        corruption,
        corruption_drop: drop,
        margin_fraction: margin_statistic(best, &splits.test, MARGIN_WINDOW)?.fraction_within,
        gamma_hat: contraction_proxy(best, &splits.val)?.gamma_hat,
    })
}

fn run_summary<S>(m: &TrainedModel<S>) -> RunSummary<'_, S> {
    RunSummary {
        method: m.report.method,
        epochs: m.report.epochs,
        best_epoch: m.report.best_epoch,
        record: &m.outcome.record,
        checkpoint: &m.outcome.best,
    }
}

fn summarize<S>(method: Method, rho: f64, models: &[TrainedModel<S>]) -> MethodSummary {
    let seeds: Vec<u64> = models.iter().map(|m| m.report.seed).collect();
    let tests: Vec<EvalResult> = models.iter().map(|m| m.report.test).collect();
    let mean = |f: fn(&ModelReport) -> f64| mean_std(&models.iter().map(|m| f(&m.report)).collect::<Vec<_>>()).0;
    MethodSummary {
        method,
        rho,
        test: aggregate_seeds(&seeds, &tests),
        mean_corruption_drop: mean(|r| r.corruption_drop),
        mean_margin_fraction: mean(|r| r.margin_fraction),
        mean_gamma_hat: mean(|r| r.gamma_hat),
    }
}

/// Baseline versus sharpness-aware training over every configured seed.
///
/// Each ρ in `train.rho_grid` (or `train.rho` when the grid is empty) is trained
/// for every seed; the ρ with the highest seed-mean validation hard-spike
/// accuracy is kept (first on ties). Test metrics are computed only for the
/// selected models.
pub fn run_comparison<S: Scalar>(cfg: &RunConfig, splits: &Splits<S>) -> Result<Comparison<S>> {
    let grid: Vec<f64> = if cfg.train.rho_grid.is_empty() {
        vec![cfg.train.rho]
    } else {
        cfg.train.rho_grid.clone()
    };
    if grid.iter().any(|r| *r <= 0.0) {
        return Err(SastError::invalid(
            "field `train.rho_grid`: comparison needs positive rho values",
        ));
    }
    let seeds = &cfg.train.seeds;
    let mut cells: Vec<(Method, f64, u64)> = seeds.iter().map(|&s| (Method::Baseline, 0.0, s)).collect();
    for &r in &grid {
        cells.extend(seeds.iter().map(|&s| (Method::Sast, r, s)));
    }
    let outcomes: Vec<TrainOutcome<S>> = cells
        .par_iter()
        .map(|&(m, r, s)| run_seed(cfg, splits, m, r, s))
        .collect::<Result<_>>()?;
    let val_hard = |o: &TrainOutcome<S>| {
        o.best_epoch
            .and_then(|e| o.record.epochs.get(e - 1))
            .map(|e| e.val_acc_hard)
            .unwrap_or(0.0)
    };
    let n = seeds.len();
    let sweep: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(g, &r)| {
            let v: Vec<f64> = outcomes[n * (g + 1)..n * (g + 2)].iter().map(val_hard).collect();
            (r, mean_std(&v).0)
        })
        .collect();
    let mut best = 0;
    for (g, row) in sweep.iter().enumerate() {
        if row.1 > sweep[best].1 {
            best = g;
        }
    }
    let best_rho = grid[best];

    let selected: Vec<(Method, f64, u64, &TrainOutcome<S>)> = (0..n)
        .map(|i| (Method::Baseline, 0.0, seeds[i], &outcomes[i]))
        .chain((0..n).map(|i| (Method::Sast, best_rho, seeds[i], &outcomes[n * (best + 1) + i])))
        .collect();
    let models: Vec<TrainedModel<S>> = selected
        .par_iter()
        .map(|&(m, r, s, o)| {
            Ok(TrainedModel {
                report: report_model(splits, m, r, s, o)?,
                outcome: o.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let (baseline, sast) = models.split_at(n);
    let matched = baseline
        .iter()
        .zip(sast)
        .map(|(b, s)| compute_matched_report(&run_summary(b), &run_summary(s), &splits.test))
        .collect::<Result<_>>()?;
    Ok(Comparison {
        sweep: if grid.len() > 1 { sweep } else { Vec::new() },
        best_rho,
        baseline_summary: summarize(Method::Baseline, 0.0, baseline),
        sast_summary: summarize(Method::Sast, best_rho, sast),
        baseline: baseline.to_vec(),
        sast: sast.to_vec(),
        matched,
    })
}
