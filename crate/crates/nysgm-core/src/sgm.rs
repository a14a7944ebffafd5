//! The Nyström stochastic gradient method in coefficient form.
//!
//! The model is `f(x) = k(x, landmarks) R b` with `b` a vector over the
//! factor's rank space, updated from `b_1 = 0` by
//!
//! ```text
//! b <- b - (eta_t / batch) * sum_j (f(x_j) - y_j) * a_j,    a_j = R^T k(landmarks, x_j)
//! ```
//!
//! over mini-batches of indices drawn i.i.d. uniformly (with replacement)
//! from one seeded stream consumed in order. When the landmarks are the
//! whole training set and the Gram matrix has full numerical rank, this is
//! the classic kernel SGM.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::nystrom::NystromFactor;
use crate::rng;
use crate::Dataset;

/// Step-size sequence `eta_t = eta1 * t^-theta` (1-based `t`).
/// `theta = 0` gives the constant schedule used by the parameter regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub eta1: f64,
    pub theta: f64,
}

impl StepSchedule {
    pub fn constant(eta: f64) -> Self {
        StepSchedule {
            eta1: eta,
            theta: 0.0,
        }
    }

    pub fn eta_at(&self, t: usize) -> f64 {
        if self.theta == 0.0 {
            self.eta1
        } else {
            self.eta1 * (t as f64).powf(-self.theta)
        }
    }

    fn validate(&self, kappa: f64) -> Result<()> {
        if !self.eta1.is_finite() || self.eta1 < 0.0 {
            return Err(Error::invalid(format!(
                "eta1 must be finite and >= 0, got {}",
                self.eta1
            )));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::invalid(format!(
                "theta must lie in [0, 1), got {}",
                self.theta
            )));
        }
        let product = self.eta1 * kappa * kappa;
        if product > 1.0 {
            return Err(Error::invalid(format!(
                "eta1 * kappa^2 = {product} exceeds 1; the iteration would be unstable"
            )));
        }
        if product > 0.5 {
            log::warn!(
                "eta1 * kappa^2 = {product} is above 1/2; convergence guarantees assume <= 1/2"
            );
        }
        Ok(())
    }
}

/// Where the projected coordinates `a_j` come from during training.
/// `PrecomputeCrossGram` stores all of them up front (`O(n m)` memory);
/// `OnTheFly` recomputes per draw (`O(m^2 + n d)` memory). Both produce
/// bitwise-identical trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StorageStrategy {
    #[default]
    PrecomputeCrossGram,
    OnTheFly,
}

/// Training-run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub schedule: StepSchedule,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub snapshot_stride: usize,
    pub storage: StorageStrategy,
}

impl TrainConfig {
    pub fn new(schedule: StepSchedule, batch_size: usize, iterations: usize, seed: u64) -> Self {
        TrainConfig {
            schedule,
            batch_size,
            iterations,
            seed,
            snapshot_stride: iterations.max(1),
            storage: StorageStrategy::default(),
        }
    }

    pub fn with_snapshot_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_storage(mut self, storage: StorageStrategy) -> Self {
        self.storage = storage;
        self
    }

    /// One-epoch stride `ceil(n / b)`, the default used by the harness.
    pub fn epoch_stride(n: usize, batch_size: usize) -> usize {
        n.div_ceil(batch_size).max(1)
    }

    fn validate(&self, kappa: f64) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iteration count T must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot stride must be >= 1"));
        }
        self.schedule.validate(kappa)
    }
}

/// Coefficient vector over the factor's rank space plus the 1-based
/// iteration counter (`t = 1` holds `b_1 = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    coefficients: Array1<f64>,
    t: usize,
}

impl ModelState {
    pub fn initial(rank: usize) -> Self {
        ModelState {
            coefficients: Array1::zeros(rank),
            t: 1,
        }
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn steps_taken(&self) -> usize {
        self.t - 1
    }

    pub fn coefficients(&self) -> ArrayView1<'_, f64> {
        self.coefficients.view()
    }
}

/// Supplies the projected coordinates `a_j = R^T k(landmarks, x_j)` of
/// training points by index.
pub trait ProjectedColumnSource {
    fn rank(&self) -> usize;
    /// Number of addressable points.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn coordinates_into(&self, j: usize, out: &mut Array1<f64>);
}

/// All coordinates computed up front; column `j` is a stored row.
pub struct PrecomputedColumns {
    features: Array2<f64>,
}

impl PrecomputedColumns {
    pub fn new(factor: &NystromFactor, points: ArrayView2<f64>) -> Self {
        PrecomputedColumns {
            features: factor.projected_features(points),
        }
    }
}

impl ProjectedColumnSource for PrecomputedColumns {
    fn rank(&self) -> usize {
        self.features.ncols()
    }

    fn len(&self) -> usize {
        self.features.nrows()
    }

    fn coordinates_into(&self, j: usize, out: &mut Array1<f64>) {
        out.assign(&self.features.row(j));
    }
}

/// Coordinates recomputed from kernel evaluations at every draw.
pub struct OnTheFlyColumns<'a> {
    factor: &'a NystromFactor,
    points: ArrayView2<'a, f64>,
}

impl<'a> OnTheFlyColumns<'a> {
    pub fn new(factor: &'a NystromFactor, points: ArrayView2<'a, f64>) -> Self {
        OnTheFlyColumns { factor, points }
    }
}

impl ProjectedColumnSource for OnTheFlyColumns<'_> {
    fn rank(&self) -> usize {
        self.factor.rank()
    }

    fn len(&self) -> usize {
        self.points.nrows()
    }

    fn coordinates_into(&self, j: usize, out: &mut Array1<f64>) {
        self.factor
            .projected_coordinates_into(self.points.row(j), out);
    }
}

/// Draw `count` indices i.i.d. uniformly from `0..n` (with replacement),
/// the stream `j_1, ..., j_{bT}` consumed in order by the trainer.
pub fn sample_index_stream(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::seeded(seed, rng::STREAM_INDICES);
    (0..count).map(|_| rng.gen_range(0..n)).collect()
}

/// One stochastic gradient step over `batch`, in place.
pub fn step(
    state: &mut ModelState,
    eta_t: f64,
    batch: &[usize],
    columns: &dyn ProjectedColumnSource,
    y: ArrayView1<f64>,
) -> Result<()> {
    let rank = state.coefficients.len();
    let mut coords = Array1::zeros(rank);
    let mut grad = Array1::zeros(rank);
    step_with_scratch(state, eta_t, batch, columns, y, &mut coords, &mut grad)
}

fn step_with_scratch(
    state: &mut ModelState,
    eta_t: f64,
    batch: &[usize],
    columns: &dyn ProjectedColumnSource,
    y: ArrayView1<f64>,
    coords: &mut Array1<f64>,
    grad: &mut Array1<f64>,
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("batch must be nonempty"));
    }
    let n = columns.len();
    let rank = state.coefficients.len();
    grad.fill(0.0);
    for &j in batch {
        if j >= n || j >= y.len() {
            return Err(Error::invalid(format!(
                "batch index {j} out of range for n={n}"
            )));
        }
        columns.coordinates_into(j, coords);
        let residual = dot(coords.view(), state.coefficients.view()) - y[j];
        for p in 0..rank {
            grad[p] += residual * coords[p];
        }
    }
    let scale = eta_t / batch.len() as f64;
    for p in 0..rank {
        state.coefficients[p] -= scale * grad[p];
    }
    state.t += 1;
    Ok(())
}

/// Run NySGM with a freshly sampled index stream derived from the config
/// seed. Deterministic: the same config and inputs give the same trajectory.
pub fn train(
    config: &TrainConfig,
    data: &Dataset,
    factor: &Arc<NystromFactor>,
) -> Result<Trajectory> {
    let indices = sample_index_stream(
        data.len(),
        config.batch_size * config.iterations,
        config.seed,
    );
    train_with_indices(config, data, factor, &indices)
}

/// Run NySGM consuming a caller-supplied index stream of length
/// `batch_size * iterations`. Lets several runs (or an external oracle)
/// share one stream.
pub fn train_with_indices(
    config: &TrainConfig,
    data: &Dataset,
    factor: &Arc<NystromFactor>,
    indices: &[usize],
) -> Result<Trajectory> {
    config.validate(factor.kernel().kappa())?;
    if data.is_empty() {
        return Err(Error::invalid("dataset must be nonempty"));
    }
    if factor.landmarks().ncols() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: factor.landmarks().ncols(),
        });
    }
    let b = config.batch_size;
    let t_max = config.iterations;
    if indices.len() != b * t_max {
        return Err(Error::invalid(format!(
            "index stream has length {}, expected batch * iterations = {}",
            indices.len(),
            b * t_max
        )));
    }

    let precomputed;
    let on_the_fly;
    let columns: &dyn ProjectedColumnSource = match config.storage {
        StorageStrategy::PrecomputeCrossGram => {
            precomputed = PrecomputedColumns::new(factor, data.x.view());
            &precomputed
        }
        StorageStrategy::OnTheFly => {
            on_the_fly = OnTheFlyColumns::new(factor, data.x.view());
            &on_the_fly
        }
    };

    let rank = factor.rank();
    let mut state = ModelState::initial(rank);
    let mut coords = Array1::zeros(rank);
    let mut grad = Array1::zeros(rank);
    let mut snapshots = Vec::new();
    for t in 1..=t_max {
        let eta_t = config.schedule.eta_at(t);
        let batch = &indices[(t - 1) * b..t * b];
        step_with_scratch(
            &mut state,
            eta_t,
            batch,
            columns,
            data.y.view(),
            &mut coords,
            &mut grad,
        )?;
        if t % config.snapshot_stride == 0 || t == t_max {
            snapshots.push(Snapshot {
                steps: t,
                coefficients: state.coefficients.clone(),
            });
        }
    }
    Ok(Trajectory {
        factor: Arc::clone(factor),
        snapshots,
    })
}

/// Coefficients recorded after `steps` gradient steps (the iterate
/// `b_{steps+1}`).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    steps: usize,
    coefficients: Array1<f64>,
}

impl Snapshot {
    pub(crate) fn from_parts(steps: usize, coefficients: Array1<f64>) -> Self {
        Snapshot {
            steps,
            coefficients,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn coefficients(&self) -> ArrayView1<'_, f64> {
        self.coefficients.view()
    }
}

/// Recorded states of one training run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    factor: Arc<NystromFactor>,
    snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub(crate) fn from_parts(factor: Arc<NystromFactor>, snapshots: Vec<Snapshot>) -> Self {
        Trajectory { factor, snapshots }
    }

    pub fn factor(&self) -> &Arc<NystromFactor> {
        &self.factor
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn predictor_at(&self, index: usize) -> Predictor {
        let snap = &self.snapshots[index];
        Predictor {
            factor: Arc::clone(&self.factor),
            coefficients: snap.coefficients.clone(),
        }
    }

    pub fn final_predictor(&self) -> Predictor {
        self.predictor_at(self.snapshots.len() - 1)
    }

    pub fn iter_predictors(&self) -> impl Iterator<Item = (usize, Predictor)> + '_ {
        (0..self.snapshots.len()).map(move |i| (self.snapshots[i].steps, self.predictor_at(i)))
    }
}

/// Anything that maps a point to a real prediction.
pub trait Predict {
    fn predict(&self, x: ArrayView1<f64>) -> f64;

    fn predict_many(&self, xs: ArrayView2<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(xs.nrows());
        for (i, row) in xs.rows().into_iter().enumerate() {
            out[i] = self.predict(row);
        }
        out
    }
}

/// A trained NySGM model: `f(x) = k(x, landmarks) R b`.
#[derive(Debug, Clone)]
pub struct Predictor {
    factor: Arc<NystromFactor>,
    coefficients: Array1<f64>,
}

impl Predictor {
    pub fn new(factor: Arc<NystromFactor>, coefficients: Array1<f64>) -> Result<Self> {
        if coefficients.len() != factor.rank() {
            return Err(Error::DimensionMismatch {
                expected: factor.rank(),
                got: coefficients.len(),
            });
        }
        Ok(Predictor {
            factor,
            coefficients,
        })
    }

    pub fn factor(&self) -> &Arc<NystromFactor> {
        &self.factor
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.factor.kernel()
    }

    pub fn coefficients(&self) -> ArrayView1<'_, f64> {
        self.coefficients.view()
    }

    /// Like [`Predict::predict`] but validates the point dimension.
    pub fn try_predict(&self, x: ArrayView1<f64>) -> Result<f64> {
        let d = self.factor.landmarks().ncols();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        Ok(self.predict(x))
    }
}

impl Predict for Predictor {
    fn predict(&self, x: ArrayView1<f64>) -> f64 {
        let a = self.factor.projected_coordinates(x);
        dot(a.view(), self.coefficients.view())
    }
}

/// Predictions for rows of a precomputed feature matrix
/// (`factor.projected_features`), sharing the prediction arithmetic of
/// [`Predict::predict`].
pub fn predictions_from_features(
    features: ArrayView2<f64>,
    coefficients: ArrayView1<f64>,
) -> Array1<f64> {
    let mut out = Array1::zeros(features.nrows());
    for (i, row) in features.rows().into_iter().enumerate() {
        out[i] = dot(row, coefficients);
    }
    out
}

pub(crate) fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        s += x * y;
    }
    s
}

/// Pass counters at iteration `t`: `epochs = b t / n` and the subsampled
/// convention `ceil(b t / m)`. Both are reported because the two readings
/// disagree; plots should label which one they use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassCount {
    pub epochs: f64,
    pub paper_passes: f64,
}

pub fn pass_count(steps: usize, batch_size: usize, n: usize, m: usize) -> PassCount {
    let work = (batch_size * steps) as f64;
    PassCount {
        epochs: work / n as f64,
        paper_passes: (work / m as f64).ceil(),
    }
}

/// The step-size/batch/iteration/subsampling regimes. `Thm1*` are the
/// no-assumption choices; `Cor1*` take the regularity inputs `(zeta, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Thm1I,
    Thm1II,
    Cor1I,
    Cor1II,
    Cor1III,
    Cor1IV,
}

impl Regime {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "thm1_I" => Ok(Regime::Thm1I),
            "thm1_II" => Ok(Regime::Thm1II),
            "cor1_I" => Ok(Regime::Cor1I),
            "cor1_II" => Ok(Regime::Cor1II),
            "cor1_III" => Ok(Regime::Cor1III),
            "cor1_IV" => Ok(Regime::Cor1IV),
            other => Err(Error::invalid(format!(
                "unknown regime {other:?}; expected thm1_I, thm1_II or cor1_I..cor1_IV"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Thm1I => "thm1_I",
            Regime::Thm1II => "thm1_II",
            Regime::Cor1I => "cor1_I",
            Regime::Cor1II => "cor1_II",
            Regime::Cor1III => "cor1_III",
            Regime::Cor1IV => "cor1_IV",
        }
    }
}

/// Constant knobs scaling the order-of-magnitude regime formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeMultipliers {
    pub c_eta: f64,
    pub c_b: f64,
    pub c_t: f64,
    pub c_m: f64,
}

impl Default for RegimeMultipliers {
    fn default() -> Self {
        RegimeMultipliers {
            c_eta: 1.0,
            c_b: 1.0,
            c_t: 1.0,
            c_m: 1.0,
        }
    }
}

/// Regularity inputs and regime selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams {
    pub zeta: f64,
    pub gamma: f64,
    pub regime: Regime,
    pub multipliers: RegimeMultipliers,
}

impl RegimeParams {
    pub fn new(regime: Regime, zeta: f64, gamma: f64) -> Self {
        RegimeParams {
            zeta,
            gamma,
            regime,
            multipliers: RegimeMultipliers::default(),
        }
    }
}

/// Concrete parameters produced by a regime for a sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimePlan {
    pub eta1: f64,
    pub theta: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub subsampling_level: usize,
}

/// Evaluate a regime's formulas at sample size `n`. Integer quantities round
/// up; the subsampling level is clamped to `n`. Logarithms are natural.
pub fn regime_schedule(params: &RegimeParams, n: usize) -> Result<RegimePlan> {
    if n < 3 {
        return Err(Error::invalid("regimes need n >= 3"));
    }
    if !(0.0..=0.5).contains(&params.zeta) {
        return Err(Error::invalid(format!(
            "zeta must lie in [0, 1/2], got {}",
            params.zeta
        )));
    }
    if !(0.0..=1.0).contains(&params.gamma) {
        return Err(Error::invalid(format!(
            "gamma must lie in [0, 1], got {}",
            params.gamma
        )));
    }
    let c = params.multipliers;
    for (name, v) in [
        ("c_eta", c.c_eta),
        ("c_b", c.c_b),
        ("c_t", c.c_t),
        ("c_m", c.c_m),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }

    let nf = n as f64;
    let ln_n = nf.ln();
    let denom = 2.0 * params.zeta + params.gamma + 1.0;
    let n_inv_denom = nf.powf(1.0 / denom);

    let (eta1, b_raw, t_raw, m_raw) = match params.regime {
        Regime::Thm1I => (
            c.c_eta / ln_n,
            c.c_b * nf.sqrt(),
            c.c_t * nf.sqrt(),
            c.c_m * nf.sqrt() * ln_n,
        ),
        Regime::Thm1II => (
            c.c_eta * nf.powf(-0.5),
            c.c_b,
            c.c_t * nf,
            c.c_m * nf.sqrt() * ln_n,
        ),
        Regime::Cor1I => (
            c.c_eta * nf.powf(-(2.0 * params.zeta + 1.0) / denom),
            c.c_b,
            c.c_t * nf.powf((2.0 * params.zeta + 2.0) / denom),
            c.c_m * n_inv_denom * ln_n,
        ),
        Regime::Cor1II => (
            c.c_eta / ln_n,
            c.c_b * nf.powf((2.0 * params.zeta + 1.0) / denom),
            c.c_t * n_inv_denom * ln_n,
            c.c_m * n_inv_denom * ln_n,
        ),
        Regime::Cor1III => (
            c.c_eta / nf,
            c.c_b,
            c.c_t * n_inv_denom * nf,
            c.c_m * n_inv_denom * ln_n,
        ),
        Regime::Cor1IV => (
            c.c_eta * nf.powf(-0.5),
            c.c_b * nf.sqrt(),
            c.c_t * n_inv_denom * nf.sqrt(),
            c.c_m * n_inv_denom * ln_n,
        ),
    };

    let batch_size = (b_raw.ceil() as usize).max(1);
    let iterations = (t_raw.ceil() as usize).max(1);
    let subsampling_level = (m_raw.ceil() as usize).clamp(1, n);
    Ok(RegimePlan {
        eta1,
        theta: 0.0,
        batch_size,
        iterations,
        subsampling_level,
    })
}
