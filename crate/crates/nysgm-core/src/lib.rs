//! Nyström stochastic gradient methods for nonparametric least-squares
//! regression in a reproducing kernel Hilbert space.
//!
//! The estimator keeps its iterates in the span of `m` landmark functions.
//! A factor `R` with `R R^T = pinv(K_mm)` turns the projected functional
//! recursion into a plain coefficient recursion over the factor's rank
//! space; training touches only `m x b` kernel blocks per step. Batch size,
//! step-size schedule, iteration count and subsampling level come either
//! from explicit settings or from the predefined regimes in [`sgm`].
//!
//! Modules:
//! - [`kernel`]: kernel evaluation and Gram matrices
//! - [`nystrom`]: landmark selection and the projection factor
//! - [`sgm`]: the stochastic training loop, schedules and regimes
//! - [`eval`]: risk measurement, reference iterations, KRR and classic-SGM
//!   baselines, step-size cross-validation
//! - [`data`]: the synthetic benchmark generator and CSV persistence
//!
//! Reproducibility: all randomness flows through ChaCha8 generators seeded
//! from caller-supplied 64-bit seeds, with a fixed stream id per purpose
//! (data, index stream, evaluation measure, landmarks), so any run is
//! replayable from its seed on any platform.

pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod nystrom;
pub mod sgm;

mod rng;

pub use data::{
    eval_grid, gen_toy, load_csv, noisy_targets, save_csv, toy_target, Dataset, EvalMeasure,
};
pub use error::{Error, Result};
pub use eval::{
    batch_sample_iteration, cross_validate_step_size, empirical_risk, generalization_error,
    krr_solve, plain_sgm_train, truncate, CvConfig, CvOutcome, CvRow, KrrModel, RiskReport,
    TargetMode, Truncated,
};
pub use kernel::KernelSpec;
pub use nystrom::{
    pseudo_sqrt_factor, select_landmarks, LandmarkStrategy, NystromFactor, DEFAULT_RTOL,
};
pub use sgm::{
    pass_count, regime_schedule, sample_index_stream, train, train_with_indices, ModelState,
    PassCount, Predict, Predictor, Regime, RegimeMultipliers, RegimeParams, RegimePlan, Snapshot,
    StepSchedule, StorageStrategy, TrainConfig, Trajectory,
};
