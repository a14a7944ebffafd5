//! `nysgm`: train and benchmark Nyström stochastic gradient regression.
//!
//! Subcommands: `gen-data`, `train`, `experiment`, `cv`. Exit codes:
//! 0 success, 1 validation error, 2 I/O error.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nysgm_cli::config::{load_config_file, resolve, Overrides, Settings};
use nysgm_cli::experiment;
use nysgm_cli::CliResult;

#[derive(Parser)]
#[command(
    name = "nysgm",
    version,
    about = "Nyström stochastic gradient regression harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark sample as CSV.
    GenData(GenDataArgs),
    /// Run one training run and write its error curve.
    Train(CommonArgs),
    /// Run the multi-level, multi-trial experiment with aggregation.
    Experiment(CommonArgs),
    /// Select the step-size by hold-out cross-validation.
    Cv(CommonArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Sample size.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct CommonArgs {
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Toy sample size (ignored when --csv is given).
    #[arg(long)]
    n: Option<usize>,
    /// Train on a CSV dataset instead of fresh toy data.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Kernel family: gaussian, linear, polynomial.
    #[arg(long)]
    kernel: Option<String>,
    /// Gaussian bandwidth.
    #[arg(long)]
    sigma: Option<f64>,
    /// Polynomial degree.
    #[arg(long)]
    degree: Option<u32>,
    /// Polynomial offset.
    #[arg(long)]
    offset: Option<f64>,
    /// Kernel bound for linear/polynomial kernels.
    #[arg(long)]
    kappa: Option<f64>,
    /// Subsampling level; repeat for several levels.
    #[arg(long = "m")]
    m: Vec<usize>,
    /// Number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    /// Constant step-size (default 1/(8n)).
    #[arg(long)]
    eta: Option<f64>,
    /// Step-size decay exponent in [0, 1).
    #[arg(long)]
    theta: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Iteration count (overrides --epochs).
    #[arg(long)]
    iters: Option<usize>,
    /// Data passes when --iters is not given (default 30).
    #[arg(long)]
    epochs: Option<f64>,
    /// Pass budget in the subsampled counting: each level m runs
    /// ceil(passes * m / batch) iterations.
    #[arg(long)]
    passes: Option<f64>,
    /// Parameter regime: thm1_I, thm1_II, cor1_I, cor1_II, cor1_III, cor1_IV.
    #[arg(long)]
    regime: Option<String>,
    /// Source regularity in [0, 1/2] (regimes).
    #[arg(long)]
    zeta: Option<f64>,
    /// Capacity exponent in [0, 1] (regimes).
    #[arg(long)]
    gamma: Option<f64>,
    /// Regime multiplier for the step-size.
    #[arg(long)]
    c_eta: Option<f64>,
    /// Regime multiplier for the batch size.
    #[arg(long)]
    c_b: Option<f64>,
    /// Regime multiplier for the iteration count.
    #[arg(long)]
    c_t: Option<f64>,
    /// Regime multiplier for the subsampling level.
    #[arg(long)]
    c_m: Option<f64>,
    /// Iterations between snapshots (default: one epoch).
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Evaluation measure size.
    #[arg(long)]
    eval_points: Option<usize>,
    /// Evaluation measure placement: grid or random.
    #[arg(long)]
    eval_mode: Option<String>,
    /// Evaluation targets: noiseless or noisy.
    #[arg(long)]
    target: Option<String>,
    /// Landmark strategy: first_m or uniform.
    #[arg(long)]
    strategy: Option<String>,
    /// Relative eigenvalue cutoff for the factor.
    #[arg(long)]
    rtol: Option<f64>,
    /// Cross-Gram storage: precompute or on_the_fly.
    #[arg(long)]
    storage: Option<String>,
    /// Comma-separated step-size grid for cv.
    #[arg(long)]
    grid: Option<String>,
    /// Truncation level for cv predictions.
    #[arg(long)]
    truncation: Option<f64>,
    /// Held-out fraction for cv.
    #[arg(long)]
    val_frac: Option<f64>,
    /// Output directory (experiment) or file (train, cv).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn settings(&self) -> CliResult<Settings> {
        let file: Option<HashMap<String, String>> = match &self.config {
            Some(path) => Some(load_config_file(path)?),
            None => None,
        };
        let overrides = Overrides {
            n: self.n,
            csv: self.csv.clone(),
            kernel: self.kernel.clone(),
            sigma: self.sigma,
            degree: self.degree,
            offset: self.offset,
            kappa: self.kappa,
            m: self.m.clone(),
            trials: self.trials,
            seed: self.seed,
            eta: self.eta,
            theta: self.theta,
            batch: self.batch,
            iters: self.iters,
            epochs: self.epochs,
            passes: self.passes,
            regime: self.regime.clone(),
            zeta: self.zeta,
            gamma: self.gamma,
            c_eta: self.c_eta,
            c_b: self.c_b,
            c_t: self.c_t,
            c_m: self.c_m,
            snapshot_stride: self.snapshot_stride,
            eval_points: self.eval_points,
            eval_mode: self.eval_mode.clone(),
            target: self.target.clone(),
            strategy: self.strategy.clone(),
            rtol: self.rtol,
            storage: self.storage.clone(),
            grid: self.grid.clone(),
            truncation: self.truncation,
            val_frac: self.val_frac,
            out: self.out.clone(),
        };
        resolve(file.as_ref(), &overrides)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
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

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenData(args) => {
            experiment::run_gen_data(args.n, args.seed, &args.out)?;
            println!("wrote {} samples to {}", args.n, args.out.display());
            Ok(())
        }
        Command::Train(args) => {
            let settings = args.settings()?;
            let rows = experiment::run_train(&settings)?;
            let last = rows.last().expect("at least one snapshot");
            println!(
                "m={} final: iter={} epochs={:.2} emp_risk={:.6} gen_error={:.6}",
                last.m,
                last.snapshot_iter,
                last.epochs,
                last.empirical_risk,
                last.generalization_error
            );
            if let Some(best) = rows.iter().min_by(|a, b| {
                a.generalization_error
                    .partial_cmp(&b.generalization_error)
                    .unwrap()
            }) {
                println!(
                    "best: iter={} epochs={:.2} gen_error={:.6}",
                    best.snapshot_iter, best.epochs, best.generalization_error
                );
            }
            Ok(())
        }
        Command::Experiment(args) => {
            let settings = args.settings()?;
            let report = experiment::run_experiment(&settings)?;
            let mut levels: Vec<usize> = report.aggregate.iter().map(|r| r.m).collect();
            levels.dedup();
            for m in levels {
                if let Some(best) = report.best_mean_error(m) {
                    println!("m={m}: best mean gen_error = {best:.6}");
                }
            }
            let out = settings.out.expect("checked in run_experiment");
            println!(
                "wrote {} and {}",
                out.join("raw.csv").display(),
                out.join("aggregate.csv").display()
            );
            Ok(())
        }
        Command::Cv(args) => {
            let settings = args.settings()?;
            let report = experiment::run_cv(&settings)?;
            for row in &report.rows {
                let mark = if row.chosen { " <- chosen" } else { "" };
                println!(
                    "eta={:<12} validation_mse={:.6}{mark}",
                    row.eta, row.validation_mse
                );
            }
            println!(
                "chosen eta = {} (train {}, validation {}); gen_error of truncated model = {:.6}",
                report.chosen_eta,
                report.train_size,
                report.validation_size,
                report.chosen_gen_error
            );
            Ok(())
        }
    }
}
