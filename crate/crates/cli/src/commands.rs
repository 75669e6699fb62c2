use std::path::{Path, PathBuf};

use serde::Serialize;

use sast_core::config::RunConfig;
use sast_core::diagnostics::{
    contraction_proxy, convergence_monitor, estimate_gradient_noise, lipschitz_probe, margin_statistic,
    sam_bound_check, BetaSource, ConvergenceInputs, NoiseSource,
};
use sast_core::eval::{accuracy, aggregate_seeds, corruption_sweep, transfer_gap, EvalResult, SeedAggregate};
use sast_core::event_data::{load_event_dataset, EventDataset};
use sast_core::experiment::{
    architecture, epochs_for, init_params, prepare_splits, run_comparison, run_seed, train_config, MethodSummary,
    ModelReport, Splits, MARGIN_WINDOW,
};
use sast_core::hwsim::{hw_evaluate, quantize_weights, HwReport, ProfileFile, QuantProfile};
use sast_core::io::{load_checkpoint, save_checkpoint};
use sast_core::optim::{sweep_rho, Method, TrainOutcome, TrainRecord};
use sast_core::rng::{stream_rng, Stream};
use sast_core::snn::SpikeMode;
use sast_core::{Dataset, Network};

use crate::error::{CliError, CliResult, InputContext, RuntimeContext};
use crate::output::{config_hash, num, opt, OutDir};
use crate::{DataArgs, DiagnoseArgs, Diagnostic, EvalArgs, HwArgs, ModeArg, Split, TrainArgs};

fn out_dir(flag: &Option<PathBuf>, cfg: Option<&RunConfig>) -> CliResult<OutDir> {
    let root = flag
        .clone()
        .or_else(|| std::env::var_os("SAST_OUT").map(PathBuf::from))
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    OutDir::create(root)
}

fn load_config(path: &Path) -> CliResult<(RunConfig, String)> {
    let cfg = RunConfig::load(path).input()?;
    let hash = config_hash(&cfg.to_toml().input()?);
    Ok((cfg, hash))
}

fn load_splits(cfg: &RunConfig) -> CliResult<Splits<f64>> {
    prepare_splits(&cfg.data).input()
}

/// Evaluation data: event streams plus their binned frames.
struct EvalData {
    events: EventDataset,
    frames: Dataset,
    steps: usize,
    source: String,
}

fn load_eval_data(a: &DataArgs, default_split: Split) -> CliResult<EvalData> {
    if let Some(dir) = &a.data {
        if a.steps == 0 {
            return Err(CliError::Input("--steps must be at least 1".into()));
        }
        let events = load_event_dataset(dir).input()?;
        let frames = events.bin(a.steps).input()?;
        return Ok(EvalData {
            events,
            frames,
            steps: a.steps,
            source: dir.display().to_string(),
        });
    }
    let path = a.config.as_ref().expect("clap requires --config or --data");
    let (cfg, _) = load_config(path)?;
    let s = load_splits(&cfg)?;
    let split = a.split.unwrap_or(default_split);
    let (events, frames, name) = match split {
        Split::Train => (s.train_events, s.train, "train"),
        Split::Val => (s.val_events, s.val, "val"),
        Split::Test => (s.test_events, s.test, "test"),
    };
    Ok(EvalData {
        events,
        frames,
        steps: s.steps,
        source: format!("{}:{name}", path.display()),
    })
}

fn load_model(path: &Path, data: &EvalData) -> CliResult<Network> {
    let params: Network = load_checkpoint(path).input()?;
    let (dim, classes) = (
        2 * data.events.width as usize * data.events.height as usize,
        data.events.num_classes,
    );
    if params.input_dim() != dim || params.num_classes() != classes {
        return Err(CliError::Input(format!(
            "checkpoint expects input dimension {} and {} classes; dataset has input dimension {dim} and {classes} classes",
            params.input_dim(),
            params.num_classes()
        )));
    }
    Ok(params)
}

fn record_without_timing(record: &TrainRecord) -> TrainRecord {
    TrainRecord {
        wall_clock_s: Vec::new(),
        ..record.clone()
    }
}

fn write_run(out: &OutDir, dir: &str, outcome: &TrainOutcome<f64>) -> CliResult<()> {
    let ck = out.path(&format!("{dir}/checkpoint.json"))?;
    save_checkpoint(&ck, &outcome.best).runtime()?;
    let rows: Vec<Vec<String>> = outcome
        .record
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                num(e.lr),
                num(e.train_loss),
                num(e.mean_grad_norm),
                num(e.val_acc_surrogate),
                num(e.val_acc_hard),
                e.grad_evals.to_string(),
            ]
        })
        .collect();
    out.csv(
        &format!("{dir}/train.csv"),
        &[
            "epoch",
            "lr",
            "train_loss",
            "mean_grad_norm",
            "val_acc_surrogate",
            "val_acc_hard",
            "grad_evals",
        ],
        &rows,
    )?;
    let steps: Vec<Vec<String>> = outcome
        .record
        .steps
        .iter()
        .map(|s| {
            vec![
                s.epoch.to_string(),
                s.step.to_string(),
                num(s.loss),
                num(s.grad_norm),
                s.grad_evals.to_string(),
            ]
        })
        .collect();
    out.csv(
        &format!("{dir}/steps.csv"),
        &["epoch", "step", "loss", "grad_norm", "grad_evals"],
        &steps,
    )?;
    out.json(
        &format!("{dir}/record.json"),
        "train_record",
        &record_without_timing(&outcome.record),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct SeedRun {
    seed: u64,
    epochs: usize,
    best_epoch: Option<usize>,
    grad_evals: u64,
    /// Validation accuracies at the selected checkpoint.
    val: EvalResult,
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    config_hash: &'a str,
    method: Method,
    rho: f64,
    seeds: &'a [u64],
    runs: Vec<SeedRun>,
    val: SeedAggregate,
}

#[derive(Serialize)]
struct Timing {
    wall_clock_s: Vec<(String, Vec<f64>)>,
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let (cfg, hash) = load_config(&a.config)?;
    let splits = load_splits(&cfg)?;
    let out = out_dir(&a.out, Some(&cfg))?;
    let method = cfg.train.method;
    let rho = match method {
        Method::Baseline => 0.0,
        Method::Sast => cfg.train.rho,
    };
    let mut runs = Vec::new();
    let mut timing = Vec::new();
    for &seed in &cfg.train.seeds {
        let o = run_seed(&cfg, &splits, method, rho, seed).runtime()?;
        let dir = format!("seed-{seed}");
        write_run(&out, &dir, &o)?;
        timing.push((dir, o.record.wall_clock_s.clone()));
        runs.push(SeedRun {
            seed,
            epochs: o.record.epochs.len(),
            best_epoch: o.best_epoch,
            grad_evals: o.record.total_grad_evals(),
            val: transfer_gap(&o.best, &splits.val).runtime()?,
        });
        println!(
            "seed {seed}: best epoch {} val hard {:.4}",
            opt(o.best_epoch),
            runs.last().map(|r| r.val.acc_hard).unwrap_or(f64::NAN)
        );
    }
    let val = aggregate_seeds(&cfg.train.seeds, &runs.iter().map(|r| r.val).collect::<Vec<_>>());
    out.json(
        "summary.json",
        "train_summary",
        &TrainSummary {
            config_hash: &hash,
            method,
            rho,
            seeds: &cfg.train.seeds,
            runs,
            val,
        },
    )?;
    out.json("timing.json", "timing", &Timing { wall_clock_s: timing })?;
    println!("wrote {}", out.root().display());
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    checkpoint: String,
    data: &'a str,
    samples: usize,
    acc_surrogate: Option<f64>,
    acc_hard: Option<f64>,
    delta_transfer: Option<f64>,
    corruption_seed: u64,
    corruption_mode: Option<String>,
    corruption: Vec<(f64, f64)>,
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let data = load_eval_data(&a.data, Split::Test)?;
    let params = load_model(&a.checkpoint, &data)?;
    if let Some(p) = a.corrupt.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(CliError::Input(format!("--corrupt values must be in [0, 1], got {p}")));
    }
    let out = out_dir(&a.out, None)?;
    let (sur, hard) = match a.mode {
        ModeArg::Surrogate => (
            Some(accuracy(&params, &data.frames, SpikeMode::Surrogate).runtime()?),
            None,
        ),
        ModeArg::Hard => (None, Some(accuracy(&params, &data.frames, SpikeMode::Hard).runtime()?)),
        ModeArg::Both => {
            let r = transfer_gap(&params, &data.frames).runtime()?;
            (Some(r.acc_surrogate), Some(r.acc_hard))
        }
    };
    let delta = sur.zip(hard).map(|(s, h)| EvalResult::new(s, h).delta_transfer);
    let mut rows = Vec::new();
    if let Some(s) = sur {
        rows.push(vec!["surrogate".into(), num(s)]);
    }
    if let Some(h) = hard {
        rows.push(vec!["hard".into(), num(h)]);
    }
    out.csv("tables/eval.csv", &["mode", "accuracy"], &rows)?;
    for r in &rows {
        println!("{:>9} accuracy {}", r[0], r[1]);
    }
    if let Some(d) = delta {
        println!("delta_transfer {d}");
    }

    let mut corruption = Vec::new();
    let mut corruption_mode = None;
    if !a.corrupt.is_empty() {
        let mode = match a.mode {
            ModeArg::Surrogate => SpikeMode::Surrogate,
            ModeArg::Hard | ModeArg::Both => SpikeMode::Hard,
        };
        let table = corruption_sweep(&params, &data.events, &a.corrupt, a.seed, mode, data.steps).runtime()?;
        let rows: Vec<Vec<String>> = table
            .iter()
            .map(|r| vec![mode.to_string(), num(r.p), num(r.accuracy)])
            .collect();
        out.csv("tables/corruption.csv", &["mode", "p", "accuracy"], &rows)?;
        for r in &table {
            println!("p={} accuracy {}", r.p, r.accuracy);
        }
        corruption = table.iter().map(|r| (r.p, r.accuracy)).collect();
        corruption_mode = Some(mode.to_string());
    }
    out.json(
        "eval.json",
        "eval",
        &EvalSummary {
            checkpoint: a.checkpoint.display().to_string(),
            data: &data.source,
            samples: data.frames.len(),
            acc_surrogate: sur,
            acc_hard: hard,
            delta_transfer: delta,
            corruption_seed: a.seed,
            corruption_mode,
            corruption,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct HwSummary<'a> {
    checkpoint: String,
    data: &'a str,
    profile: QuantProfile,
    report: HwReport,
    /// Swap-only hard-spike accuracy of the unquantized checkpoint.
    reference_hard_accuracy: f64,
    /// Fraction of samples where the fixed-point prediction equals the
    /// floating-point hard-spike prediction.
    agreement_with_hard: f64,
}

pub fn hw_sim(a: &HwArgs) -> CliResult<()> {
    let profile = match a.profile.as_str() {
        "loihi_like" | "aggressive" => QuantProfile::by_name(&a.profile).input()?,
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Input(format!(
                    "unknown profile '{path}' (not a built-in name, and reading it as a file failed: {e})"
                ))
            })?;
            ProfileFile::parse(&text).input()?
        }
    };
    let data = load_eval_data(&a.data, Split::Test)?;
    let params = load_model(&a.checkpoint, &data)?;
    let out = out_dir(&a.out, None)?;
    let qnet = quantize_weights(&params, &profile).runtime()?;
    out.text("qnet.json", &(qnet.to_json().runtime()? + "\n"))?;
    let report = hw_evaluate(&qnet, &data.frames, a.reference).runtime()?;
    let agreement = sast_core::hwsim::hard_agreement(&qnet, &params, &data.frames).runtime()?;
    let reference_hard = accuracy(&params, &data.frames, SpikeMode::Hard).runtime()?;
    out.csv(
        "tables/hw.csv",
        &[
            "profile",
            "weight_bits",
            "membrane",
            "accuracy",
            "ksynops",
            "r_ops",
            "agreement_with_hard",
        ],
        &[vec![
            profile.name.clone(),
            profile.weight_bits.to_string(),
            format!("Q{}.{}", profile.membrane.int_bits, profile.membrane.frac_bits),
            num(report.accuracy),
            num(report.ksynops),
            report.r_ops.map(num).unwrap_or_default(),
            num(agreement),
        ]],
    )?;
    println!(
        "{}: accuracy {} kSynOps {} agreement {}",
        profile.name, report.accuracy, report.ksynops, agreement
    );
    out.json(
        "hw.json",
        "hw_sim",
        &HwSummary {
            checkpoint: a.checkpoint.display().to_string(),
            data: &data.source,
            profile,
            report,
            reference_hard_accuracy: reference_hard,
            agreement_with_hard: agreement,
        },
    )?;
    Ok(())
}

pub fn diagnose(a: &DiagnoseArgs) -> CliResult<()> {
    let data = load_eval_data(&a.data, Split::Val)?;
    let params = load_model(&a.checkpoint, &data)?;
    let all = a.what.contains(&Diagnostic::All);
    let wants = |d: Diagnostic| all || a.what.contains(&d);
    if wants(Diagnostic::Convergence) && a.record.is_none() && !all {
        return Err(CliError::Input("--what convergence needs --record".into()));
    }
    if a.probes == 0 {
        return Err(CliError::Input("--probes must be at least 1".into()));
    }
    let out = out_dir(&a.out, None)?;
    if wants(Diagnostic::Gamma) {
        let r = contraction_proxy(&params, &data.frames).runtime()?;
        println!("gamma_hat {} (contractive: {})", r.gamma_hat, r.contractive);
        out.json("diagnostics/gamma.json", "contraction", &r)?;
    }
    if wants(Diagnostic::Lipschitz) {
        let mut rng = stream_rng(a.seed, Stream::Probe);
        let r = lipschitz_probe(&params, &data.frames, a.probes, a.noise, &mut rng).runtime()?;
        if !r.bound.contractive {
            println!("warning: gamma = {} >= 1, network is not contractive", r.bound.gamma);
        }
        println!(
            "L_x {} max ratio {} violations {}",
            r.bound.l_x, r.max_ratio, r.violations
        );
        out.json("diagnostics/lipschitz.json", "lipschitz", &r)?;
    }
    if wants(Diagnostic::Margins) {
        let r = margin_statistic(&params, &data.frames, MARGIN_WINDOW).runtime()?;
        println!("fraction of margins within ±{}: {}", r.window, r.fraction_within);
        let rows: Vec<Vec<String>> = r.histogram.iter().map(|b| vec![num(b.center), num(b.mass)]).collect();
        out.csv("tables/margins.csv", &["center", "mass"], &rows)?;
        out.json("diagnostics/margins.json", "margins", &r)?;
    }
    if wants(Diagnostic::Samband) {
        let mut rng = stream_rng(a.seed, Stream::Probe);
        let batch: Vec<_> = data.frames.samples().iter().map(|s| (&s.frames, s.label)).collect();
        let r = sam_bound_check(&params, &batch, a.rho, a.probes, BetaSource::default(), &mut rng).runtime()?;
        println!(
            "sharpness bound: lhs {} rhs {} satisfied {}",
            r.lhs_max, r.rhs, r.satisfied
        );
        out.json("diagnostics/samband.json", "sam_bound", &r)?;
    }
    if wants(Diagnostic::Convergence) {
        if let Some(path) = &a.record {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let record: TrainRecord =
                serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let mut rng = stream_rng(a.seed, Stream::Probe);
            let batch: Vec<_> = data.frames.samples().iter().map(|s| (&s.frames, s.label)).collect();
            let beta = sam_bound_check(&params, &batch, a.rho, 1, BetaSource::default(), &mut rng)
                .runtime()?
                .beta_hat;
            let sigma = estimate_gradient_noise(&params, &data.frames, 32, 8, &mut rng).runtime()?;
            let initial_loss = record.steps.first().map(|s| s.loss).unwrap_or(f64::NAN);
            let r = convergence_monitor(
                &record,
                &ConvergenceInputs {
                    beta_hat: beta,
                    rho: a.rho,
                    eta: a.lr,
                    initial_loss,
                    loss_star: 0.0,
                    sigma_noise_sq: sigma,
                    noise_source: NoiseSource::Estimated,
                },
            )
            .input()?;
            println!("mean ||g||^2 {} vs bound {}", r.mean_sq_grad_norm, r.rhs);
            out.json("diagnostics/convergence.json", "convergence", &r)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    config_hash: &'a str,
    seeds: &'a [u64],
    table: sast_core::optim::SweepTable,
}

pub fn sweep(a: &TrainArgs) -> CliResult<()> {
    let (cfg, hash) = load_config(&a.config)?;
    if cfg.train.rho_grid.is_empty() {
        return Err(CliError::Input(
            "field `train.rho_grid`: sweep needs at least one value".into(),
        ));
    }
    let splits = load_splits(&cfg)?;
    let out = out_dir(&a.out, Some(&cfg))?;
    let arch = architecture(&cfg.model, splits.input_dim(), splits.num_classes());
    let base = train_config(&cfg.train, Method::Sast, cfg.train.rho, 0);
    let table = sweep_rho(
        &splits.train,
        &splits.val,
        &cfg.train.rho_grid,
        &base,
        &cfg.train.seeds,
        |seed| init_params(&cfg.model, &arch, seed),
    )
    .runtime()?;
    let runs: Vec<Vec<String>> = table
        .rows
        .iter()
        .flat_map(|row| row.runs.iter())
        .map(|r| {
            vec![
                num(r.rho),
                r.seed.to_string(),
                opt(r.best_epoch),
                num(r.val_acc_surrogate),
                num(r.val_acc_hard),
                num(r.val_acc_surrogate - r.val_acc_hard),
                r.grad_evals.to_string(),
            ]
        })
        .collect();
    out.csv(
        "tables/sweep.csv",
        &[
            "rho",
            "seed",
            "best_epoch",
            "val_acc_surrogate",
            "val_acc_hard",
            "delta_transfer",
            "grad_evals",
        ],
        &runs,
    )?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.rho),
                num(r.mean_val_surrogate),
                num(r.std_val_surrogate),
                num(r.mean_val_hard),
                num(r.std_val_hard),
                num(r.mean_delta_transfer),
            ]
        })
        .collect();
    out.csv(
        "tables/sweep_summary.csv",
        &[
            "rho",
            "mean_val_surrogate",
            "std_val_surrogate",
            "mean_val_hard",
            "std_val_hard",
            "mean_delta_transfer",
        ],
        &rows,
    )?;
    for r in &table.rows {
        println!("rho {}: val hard {:.4} ± {:.4}", r.rho, r.mean_val_hard, r.std_val_hard);
    }
    println!("best rho {}", table.best_rho);
    out.json(
        "summary.json",
        "sweep",
        &SweepSummary {
            config_hash: &hash,
            seeds: &cfg.train.seeds,
            table,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    config_hash: &'a str,
    seeds: &'a [u64],
    baseline_epochs: usize,
    sast_epochs: usize,
    /// `(ρ, mean validation hard accuracy)` per grid value.
    sweep: Vec<(f64, f64)>,
    best_rho: f64,
    baseline: MethodSummary,
    sast: MethodSummary,
    /// `1 − Δ_sast / Δ_baseline` on seed means; absent when the baseline gap is not positive.
    relative_gap_reduction: Option<f64>,
    per_seed: Vec<ModelReport>,
    compute_matched: Vec<sast_core::eval::ComparisonReport>,
}

pub fn compare(a: &TrainArgs) -> CliResult<()> {
    let (cfg, hash) = load_config(&a.config)?;
    let splits = load_splits(&cfg)?;
    let out = out_dir(&a.out, Some(&cfg))?;
    let c = run_comparison(&cfg, &splits).runtime()?;
    let models = || c.baseline.iter().chain(&c.sast);
    let mut timing = Vec::new();
    for m in models() {
        let dir = format!("models/{}-seed-{}", m.report.method, m.report.seed);
        write_run(&out, &dir, &m.outcome)?;
        timing.push((dir, m.outcome.record.wall_clock_s.clone()));
    }
    let table1: Vec<Vec<String>> = models()
        .map(|m| {
            let r = &m.report;
            vec![
                r.method.to_string(),
                num(r.rho),
                r.seed.to_string(),
                num(r.test.acc_surrogate),
                num(r.test.acc_hard),
                num(r.test.delta_transfer),
                num(r.margin_fraction),
                num(r.gamma_hat),
            ]
        })
        .collect();
    out.csv(
        "tables/transfer.csv",
        &[
            "method",
            "rho",
            "seed",
            "acc_surrogate",
            "acc_hard",
            "delta_transfer",
            "margin_fraction",
            "gamma_hat",
        ],
        &table1,
    )?;
    let corruption: Vec<Vec<String>> = models()
        .flat_map(|m| {
            m.report
                .corruption
                .iter()
                .map(|r| {
                    vec![
                        m.report.method.to_string(),
                        m.report.seed.to_string(),
                        num(r.p),
                        num(r.accuracy),
                    ]
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out.csv(
        "tables/corruption.csv",
        &["method", "seed", "p", "accuracy_hard"],
        &corruption,
    )?;
    let matched: Vec<Vec<String>> = c
        .matched
        .iter()
        .zip(&cfg.train.seeds)
        .flat_map(|(rep, seed)| {
            rep.rows
                .iter()
                .map(|r| {
                    vec![
                        r.method.to_string(),
                        seed.to_string(),
                        r.epochs.to_string(),
                        opt(r.best_epoch),
                        r.grad_evals.to_string(),
                        num(r.test.acc_surrogate),
                        num(r.test.acc_hard),
                        num(r.test.delta_transfer),
                        rep.budget_matched.to_string(),
                    ]
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out.csv(
        "tables/compute_matched.csv",
        &[
            "method",
            "seed",
            "epochs",
            "best_epoch",
            "grad_evals",
            "acc_surrogate",
            "acc_hard",
            "delta_transfer",
            "budget_matched",
        ],
        &matched,
    )?;
    let (b, s) = (&c.baseline_summary, &c.sast_summary);
    let reduction = (b.test.mean_delta > 0.0).then(|| 1.0 - s.test.mean_delta / b.test.mean_delta);
    for m in [b, s] {
        println!(
            "{:>8} (rho {}): surrogate {:.4} hard {:.4} delta {:.4} drop@0.4 {:.4} margins±0.2 {:.4} gamma {:.4}",
            m.method.to_string(),
            m.rho,
            m.test.mean_surrogate,
            m.test.mean_hard,
            m.test.mean_delta,
            m.mean_corruption_drop,
            m.mean_margin_fraction,
            m.mean_gamma_hat
        );
    }
    if let Some(r) = reduction {
        println!("relative gap reduction {r:.4}");
    }
    out.json(
        "summary.json",
        "comparison",
        &CompareSummary {
            config_hash: &hash,
            seeds: &cfg.train.seeds,
            baseline_epochs: epochs_for(&cfg.train, Method::Baseline),
            sast_epochs: epochs_for(&cfg.train, Method::Sast),
            sweep: c.sweep.clone(),
            best_rho: c.best_rho,
            baseline: b.clone(),
            sast: s.clone(),
            relative_gap_reduction: reduction,
            per_seed: models().map(|m| m.report.clone()).collect(),
            compute_matched: c.matched.clone(),
        },
    )?;
    out.json("timing.json", "timing", &Timing { wall_clock_s: timing })?;
    Ok(())
}
