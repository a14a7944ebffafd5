//! Trial orchestration and result emission.
//!
//! An experiment runs NySGM for every `(subsampling level, trial)` pair,
//! records error curves at the configured snapshots, and writes two CSV
//! files into the output directory: `raw.csv` with one row per snapshot of
//! every trial, and `aggregate.csv` with per-snapshot means and standard
//! deviations over trials (sample convention; a single trial reports 0).
//!
//! Reported columns: `empirical_risk` is the mean squared error on the
//! training sample. `generalization_error` is the root-mean-square
//! deviation from the evaluation targets (square it for the mean squared
//! deviation); against noiseless targets this is the norm distance whose
//! square is the excess risk.
//!
//! Trials are independent jobs with seed `base_seed + trial` and may run
//! concurrently; rows are sorted by `(m, trial, snapshot)` before writing,
//! so scheduling never changes output bytes.

use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use nysgm_core::{
    eval_grid, gen_toy, load_csv, noisy_targets, pass_count, save_csv, Dataset, EvalMeasure,
    KernelSpec, LandmarkStrategy, NystromFactor, RegimeParams, StepSchedule, StorageStrategy,
    TargetMode, TrainConfig,
};

use crate::config::{Settings, DEFAULT_SUBSAMPLING_LEVELS};
use crate::{CliError, CliResult};

/// One snapshot of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub m: usize,
    pub trial: usize,
    pub snapshot_iter: usize,
    pub epochs: f64,
    pub paper_passes: f64,
    pub empirical_risk: f64,
    pub generalization_error: f64,
}

/// Per-snapshot aggregate over trials at one subsampling level.
#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub m: usize,
    pub snapshot_iter: usize,
    pub epochs: f64,
    pub paper_passes: f64,
    pub mean_gen_error: f64,
    pub std_gen_error: f64,
    pub mean_emp_risk: f64,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggRow>,
}

impl ExperimentReport {
    /// Smallest mean generalization error over snapshots for one level.
    pub fn best_mean_error(&self, m: usize) -> Option<f64> {
        self.aggregate
            .iter()
            .filter(|r| r.m == m)
            .map(|r| r.mean_gen_error)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }
}

/// How long a run is, possibly depending on the subsampling level.
#[derive(Debug, Clone, Copy)]
pub enum RunLength {
    /// A fixed number of iterations.
    Iterations(usize),
    /// A budget of `ceil(passes * m / batch)` iterations, so every level
    /// gets the same number of passes in the subsampled counting.
    Passes(f64),
}

/// Everything needed to run jobs, resolved from [`Settings`].
pub struct Plan {
    pub source: DataSource,
    pub n: usize,
    pub kernel: KernelSpec,
    pub schedule: StepSchedule,
    pub batch: usize,
    pub run_length: RunLength,
    pub stride_override: Option<usize>,
    pub m_list: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub eval_points: Array2<f64>,
    pub eval_targets: Array1<f64>,
    pub target_mode: TargetMode,
    pub strategy: LandmarkStrategy,
    pub rtol: f64,
    pub storage: StorageStrategy,
}

impl Plan {
    /// Iteration count and snapshot stride for one subsampling level.
    /// Fixed-length runs default to one snapshot per epoch; pass-budget
    /// runs to one snapshot every two passes.
    pub fn sizing(&self, m: usize) -> (usize, usize) {
        match self.run_length {
            RunLength::Iterations(t) => {
                let stride = self
                    .stride_override
                    .unwrap_or_else(|| TrainConfig::epoch_stride(self.n, self.batch));
                (t, stride.min(t.max(1)))
            }
            RunLength::Passes(p) => {
                let t = ((p * m as f64) / self.batch as f64).ceil().max(1.0) as usize;
                let stride = self.stride_override.unwrap_or_else(|| {
                    ((2 * m) as f64 / self.batch as f64).ceil().max(1.0) as usize
                });
                (t, stride.min(t))
            }
        }
    }
}

#[derive(Clone)]
pub enum DataSource {
    /// Fresh synthetic data per trial.
    Toy,
    /// One fixed dataset shared by all trials.
    Fixed(Arc<Dataset>),
}

pub fn build_plan(settings: &Settings) -> CliResult<Plan> {
    let (source, n) = match &settings.csv {
        Some(path) => {
            let ds = load_csv(path)?;
            let n = ds.len();
            (DataSource::Fixed(Arc::new(ds)), n)
        }
        None => (DataSource::Toy, settings.n),
    };
    if n < 1 {
        return Err(CliError::validation("field n: need at least one sample"));
    }

    let (schedule, batch, run_length, regime_m) = match settings.regime {
        Some(regime) => {
            let params = RegimeParams {
                zeta: settings.zeta,
                gamma: settings.gamma,
                regime,
                multipliers: settings.multipliers,
            };
            let plan = nysgm_core::regime_schedule(&params, n)?;
            let schedule = StepSchedule {
                eta1: plan.eta1,
                theta: plan.theta,
            };
            (
                schedule,
                plan.batch_size,
                RunLength::Iterations(plan.iterations),
                Some(plan.subsampling_level),
            )
        }
        None => {
            // Without an explicit step-size, use the toy benchmark's
            // default eta = 1/(8n).
            let eta = settings.eta.unwrap_or(1.0 / (8.0 * n as f64));
            let schedule = StepSchedule {
                eta1: eta,
                theta: settings.theta,
            };
            let batch = settings.batch;
            let run_length = match (settings.iters, settings.passes) {
                (Some(t), _) => RunLength::Iterations(t.max(1)),
                (None, Some(p)) => RunLength::Passes(p),
                (None, None) => {
                    let t = ((settings.epochs * n as f64) / batch as f64)
                        .ceil()
                        .max(1.0);
                    RunLength::Iterations(t as usize)
                }
            };
            (schedule, batch, run_length, None)
        }
    };

    let m_list: Vec<usize> = if !settings.m.is_empty() {
        settings.m.clone()
    } else if let Some(m) = regime_m {
        vec![m]
    } else {
        DEFAULT_SUBSAMPLING_LEVELS
            .iter()
            .copied()
            .filter(|&m| m <= n)
            .collect()
    };
    if m_list.is_empty() {
        return Err(CliError::validation(
            "field m: no usable subsampling levels",
        ));
    }
    for &m in &m_list {
        if m == 0 || m > n {
            return Err(CliError::validation(format!(
                "field m: level {m} must satisfy 1 <= m <= n = {n}"
            )));
        }
    }

    let (eval_points, eval_targets) = match &source {
        DataSource::Toy => {
            let measure = if settings.eval_random {
                EvalMeasure::Random {
                    seed: settings.seed,
                }
            } else {
                EvalMeasure::MidpointGrid
            };
            let (points, noiseless) = eval_grid(settings.eval_points, measure)?;
            let targets = match settings.target {
                TargetMode::Noiseless => noiseless,
                TargetMode::Noisy => noisy_targets(noiseless.view(), settings.seed),
            };
            (points, targets)
        }
        DataSource::Fixed(ds) => {
            // External data is evaluated on its own points.
            let targets = match settings.target {
                TargetMode::Noiseless => ds.f_true.clone().ok_or_else(|| {
                    CliError::validation(
                        "csv data has no ftrue column; use --target noisy or add ftrue",
                    )
                })?,
                TargetMode::Noisy => ds.y.clone(),
            };
            (ds.x.clone(), targets)
        }
    };

    Ok(Plan {
        source,
        n,
        kernel: settings.kernel.clone(),
        schedule,
        batch,
        run_length,
        stride_override: settings.snapshot_stride,
        m_list,
        trials: settings.trials,
        base_seed: settings.seed,
        eval_points,
        eval_targets,
        target_mode: settings.target,
        strategy: settings.strategy,
        rtol: settings.rtol,
        storage: settings.storage,
    })
}

/// Run every `(m, trial)` job, aggregate, and write `raw.csv` and
/// `aggregate.csv` under the output directory.
pub fn run_experiment(settings: &Settings) -> CliResult<ExperimentReport> {
    let out = settings
        .out
        .clone()
        .ok_or_else(|| CliError::validation("field out: output directory required"))?;
    let plan = build_plan(settings)?;

    let jobs: Vec<(usize, usize)> = plan
        .m_list
        .iter()
        .flat_map(|&m| (0..plan.trials).map(move |t| (m, t)))
        .collect();

    let mut raw: Vec<RawRow> = jobs
        .par_iter()
        .map(|&(m, trial)| run_trial(&plan, m, trial))
        .collect::<CliResult<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    raw.sort_by_key(|r| (r.m, r.trial, r.snapshot_iter));

    let aggregate = aggregate_rows(&raw, plan.trials);
    let report = ExperimentReport { raw, aggregate };

    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", out.display())))?;
    write_raw_csv(&report.raw, &out.join("raw.csv"))?;
    write_aggregate_csv(&report.aggregate, &out.join("aggregate.csv"))?;
    Ok(report)
}

/// Error curve of a single training run.
pub fn run_trial(plan: &Plan, m: usize, trial: usize) -> CliResult<Vec<RawRow>> {
    let trial_seed = plan.base_seed.wrapping_add(trial as u64);
    let data: Arc<Dataset> = match &plan.source {
        DataSource::Toy => Arc::new(gen_toy(plan.n, trial_seed)?),
        DataSource::Fixed(ds) => Arc::clone(ds),
    };

    let landmarks = nysgm_core::select_landmarks(plan.n, m, plan.strategy, trial_seed)?;
    let factor = Arc::new(NystromFactor::build(
        plan.kernel.clone(),
        &data,
        &landmarks,
        plan.rtol,
    )?);

    let (iterations, stride) = plan.sizing(m);
    let config = TrainConfig {
        schedule: plan.schedule,
        batch_size: plan.batch,
        iterations,
        seed: trial_seed,
        snapshot_stride: stride,
        storage: plan.storage,
    };
    let trajectory = nysgm_core::train(&config, &data, &factor)?;

    let train_features = factor.projected_features(data.x.view());
    let eval_features = factor.projected_features(plan.eval_points.view());

    let mut rows = Vec::with_capacity(trajectory.snapshots().len());
    for snap in trajectory.snapshots() {
        let coeffs = snap.coefficients();
        let train_pred = nysgm_core::sgm::predictions_from_features(train_features.view(), coeffs);
        let eval_pred = nysgm_core::sgm::predictions_from_features(eval_features.view(), coeffs);

        let emp = mean_squared_error(train_pred.view(), data.y.view());
        let gen_mse = mean_squared_error(eval_pred.view(), plan.eval_targets.view());
        let pass = pass_count(snap.steps(), plan.batch, plan.n, m);
        rows.push(RawRow {
            m,
            trial,
            snapshot_iter: snap.steps(),
            epochs: pass.epochs,
            paper_passes: pass.paper_passes,
            empirical_risk: emp,
            generalization_error: gen_mse.sqrt(),
        });
    }
    Ok(rows)
}

fn mean_squared_error(pred: ndarray::ArrayView1<f64>, target: ndarray::ArrayView1<f64>) -> f64 {
    let mut s = 0.0;
    for (p, t) in pred.iter().zip(target.iter()) {
        let r = p - t;
        s += r * r;
    }
    s / pred.len() as f64
}

fn aggregate_rows(raw: &[RawRow], trials: usize) -> Vec<AggRow> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let m = raw[i].m;
        // Rows are sorted (m, trial, snapshot); each trial contributes the
        // same snapshot sequence.
        let block_end = raw[i..].iter().take_while(|r| r.m == m).count() + i;
        let per_trial = (block_end - i) / trials;
        for s in 0..per_trial {
            let mut gens = Vec::with_capacity(trials);
            let mut emp_sum = 0.0;
            for t in 0..trials {
                let row = &raw[i + t * per_trial + s];
                debug_assert_eq!(row.trial, t);
                debug_assert_eq!(row.snapshot_iter, raw[i + s].snapshot_iter);
                gens.push(row.generalization_error);
                emp_sum += row.empirical_risk;
            }
            let mean = gens.iter().sum::<f64>() / trials as f64;
            let std = if trials > 1 {
                let ss = gens.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>();
                (ss / (trials as f64 - 1.0)).sqrt()
            } else {
                0.0
            };
            let template = &raw[i + s];
            out.push(AggRow {
                m,
                snapshot_iter: template.snapshot_iter,
                epochs: template.epochs,
                paper_passes: template.paper_passes,
                mean_gen_error: mean,
                std_gen_error: std,
                mean_emp_risk: emp_sum / trials as f64,
            });
        }
        i = block_end;
    }
    out
}

fn write_raw_csv(rows: &[RawRow], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    w.write_record([
        "m",
        "trial",
        "snapshot_iter",
        "epochs",
        "paper_passes",
        "emp_risk",
        "gen_error",
    ])
    .map_err(|e| CliError::io(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.trial.to_string(),
            r.snapshot_iter.to_string(),
            r.epochs.to_string(),
            r.paper_passes.to_string(),
            r.empirical_risk.to_string(),
            r.generalization_error.to_string(),
        ])
        .map_err(|e| CliError::io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(e.to_string()))?;
    Ok(())
}

fn write_aggregate_csv(rows: &[AggRow], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    w.write_record([
        "m",
        "snapshot_iter",
        "epochs",
        "paper_passes",
        "mean_gen_error",
        "std_gen_error",
        "mean_emp_risk",
    ])
    .map_err(|e| CliError::io(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.snapshot_iter.to_string(),
            r.epochs.to_string(),
            r.paper_passes.to_string(),
            r.mean_gen_error.to_string(),
            r.std_gen_error.to_string(),
            r.mean_emp_risk.to_string(),
        ])
        .map_err(|e| CliError::io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(e.to_string()))?;
    Ok(())
}

/// Single training run (first subsampling level, trial 0); writes the error
/// curve to `out` as one CSV file.
pub fn run_train(settings: &Settings) -> CliResult<Vec<RawRow>> {
    let out = settings
        .out
        .clone()
        .ok_or_else(|| CliError::validation("field out: output file required"))?;
    let mut plan = build_plan(settings)?;
    if plan.m_list.len() > 1 {
        plan.m_list.truncate(1);
    }
    let rows = run_trial(&plan, plan.m_list[0], 0)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    write_raw_csv(&rows, &out)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReportRow {
    pub eta: f64,
    pub validation_mse: f64,
    pub chosen: bool,
}

#[derive(Debug)]
pub struct CvReport {
    pub rows: Vec<CvReportRow>,
    pub chosen_eta: f64,
    /// RMS deviation of the chosen truncated model on the evaluation measure.
    pub chosen_gen_error: f64,
    pub train_size: usize,
    pub validation_size: usize,
}

/// Hold-out cross-validation of the step-size; writes the grid table to
/// `out` as one CSV file.
pub fn run_cv(settings: &Settings) -> CliResult<CvReport> {
    let out = settings
        .out
        .clone()
        .ok_or_else(|| CliError::validation("field out: output file required"))?;
    let plan = build_plan(settings)?;

    let data: Arc<Dataset> = match &plan.source {
        DataSource::Toy => Arc::new(gen_toy(plan.n, plan.base_seed)?),
        DataSource::Fixed(ds) => Arc::clone(ds),
    };
    let n = data.len();
    let n_val = ((n as f64 * settings.val_frac).round() as usize).clamp(1, n - 1);
    let n_train = n - n_val;
    let train = data.slice(0, n_train)?;
    let validation = data.slice(n_train, n)?;

    let grid = settings.grid.clone().unwrap_or_else(|| {
        let nf = n_train as f64;
        vec![1.0 / (2.0 * nf), 1.0 / (8.0 * nf), 1.0 / (32.0 * nf)]
    });

    let m = plan.m_list[0].min(n_train);
    let landmarks = nysgm_core::select_landmarks(n_train, m, plan.strategy, plan.base_seed)?;
    let factor = Arc::new(NystromFactor::build(
        plan.kernel.clone(),
        &train,
        &landmarks,
        plan.rtol,
    )?);

    let (iterations, _) = plan.sizing(m);
    let template = TrainConfig {
        schedule: StepSchedule {
            eta1: 0.0,
            theta: plan.schedule.theta,
        },
        batch_size: plan.batch,
        iterations,
        seed: plan.base_seed,
        snapshot_stride: iterations,
        storage: plan.storage,
    };
    let cv = nysgm_core::CvConfig {
        grid,
        truncation: settings.truncation,
    };
    let outcome =
        nysgm_core::cross_validate_step_size(&cv, &train, &validation, &factor, &template)?;

    let chosen_gen_error = nysgm_core::generalization_error(
        &outcome.model,
        plan.eval_points.view(),
        plan.eval_targets.view(),
    )?
    .sqrt();

    let rows: Vec<CvReportRow> = outcome
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| CvReportRow {
            eta: r.eta,
            validation_mse: r.validation_mse,
            chosen: i == outcome.chosen_index,
        })
        .collect();

    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    let mut w = csv::Writer::from_path(&out)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", out.display())))?;
    w.write_record(["eta", "validation_mse", "chosen"])
        .map_err(|e| CliError::io(e.to_string()))?;
    for r in &rows {
        w.write_record([
            r.eta.to_string(),
            r.validation_mse.to_string(),
            r.chosen.to_string(),
        ])
        .map_err(|e| CliError::io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(e.to_string()))?;

    Ok(CvReport {
        rows,
        chosen_eta: outcome.chosen_eta(),
        chosen_gen_error,
        train_size: n_train,
        validation_size: n_val,
    })
}

/// Generate the toy sample and persist it.
pub fn run_gen_data(n: usize, seed: u64, out: &Path) -> CliResult<()> {
    let ds = gen_toy(n, seed)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    save_csv(&ds, out)?;
    Ok(())
}
