//! `sast`: train, evaluate, sweep, diagnose and hardware-simulate spiking
//! networks trained with sharpness-aware surrogate gradients.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "sast",
    version,
    about = "Sharpness-aware surrogate training for spiking networks"
)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model per configured seed.
    Train(TrainArgs),
    /// Evaluate a checkpoint in surrogate and/or hard-spike mode.
    Eval(EvalArgs),
    /// Evaluate under random event-drop corruption (eval with --corrupt).
    CorruptEval(EvalArgs),
    /// Quantize a checkpoint and run fixed-point hard-spike inference.
    HwSim(HwArgs),
    /// Train over the configured rho grid and select the best value on validation.
    SweepRho(TrainArgs),
    /// Run a diagnostic report on a checkpoint.
    Diagnose(DiagnoseArgs),
    /// Baseline versus sharpness-aware training, evaluated on the test split.
    Compare(TrainArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; falls back to $SAST_OUT, then `[output] dir`, then `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Take the dataset from this run configuration.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub config: Option<PathBuf>,
    /// Split of the configured dataset.
    #[arg(long, value_enum)]
    pub split: Option<Split>,
    /// Directory dataset (`dataset.toml` plus `<class>/<index>.bin`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Temporal bins for a directory dataset.
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Surrogate,
    Hard,
    Both,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    /// Event-drop probabilities to sweep.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub corrupt: Vec<f64>,
    /// Root seed of the corruption stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HwArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// `loihi_like`, `aggressive` or a profile file (TOML).
    #[arg(long, default_value = "loihi_like")]
    pub profile: String,
    /// Reference kSynOps for the operations ratio.
    #[arg(long)]
    pub reference: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Diagnostic {
    Gamma,
    Lipschitz,
    Margins,
    Samband,
    Convergence,
    All,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, num_args = 1.., value_delimiter = ',', default_value = "all")]
    pub what: Vec<Diagnostic>,
    /// Perturbation probes for `lipschitz` and `samband`.
    #[arg(long, default_value_t = 100)]
    pub probes: usize,
    /// Standard deviation of the input perturbation for `lipschitz`.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Ascent radius for `samband` and the sharpness floor of `convergence`.
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    /// Step size used by `convergence`.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Training record (`record.json` from `train`) for `convergence`.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::CorruptEval(a) => {
            if a.corrupt.is_empty() {
                return Err(CliError::Input("corrupt-eval needs --corrupt".into()));
            }
            commands::eval(&a)
        }
        Command::HwSim(a) => commands::hw_sim(&a),
        Command::SweepRho(a) => commands::sweep(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Compare(a) => commands::compare(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
