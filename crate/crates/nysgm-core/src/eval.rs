//! Risk measurement, deterministic reference iterations, baselines and
//! hold-out cross-validation of the step-size.
//!
//! [`batch_sample_iteration`] runs the full-batch counterpart of the
//! stochastic recursion: averaging the stochastic trajectories over index
//! streams converges to it, which makes it the reference for unbiasedness
//! checks. [`plain_sgm_train`] is the classic (unprojected) kernel SGM
//! baseline that maintains one coefficient per training point and an
//! `n x n` Gram matrix. [`krr_solve`] is the explicit-penalty baseline.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::nystrom::NystromFactor;
use crate::sgm::{dot, Predict, Predictor, Snapshot, StepSchedule, TrainConfig, Trajectory};
use crate::Dataset;

/// What the generalization error is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// Noisy observations drawn like the training targets.
    Noisy,
    /// Noiseless regression-function values (excess-risk convention).
    Noiseless,
}

impl TargetMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "noisy" => Ok(TargetMode::Noisy),
            "noiseless" => Ok(TargetMode::Noiseless),
            other => Err(Error::invalid(format!("unknown target mode {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetMode::Noisy => "noisy",
            TargetMode::Noiseless => "noiseless",
        }
    }
}

/// Empirical risk on a sample plus error over an evaluation measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskReport {
    pub empirical_risk: f64,
    pub generalization_error: f64,
    pub target_mode: TargetMode,
}

/// Mean squared error on the sample: `(1/n) sum (p(x_i) - y_i)^2`.
pub fn empirical_risk(p: &impl Predict, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empirical risk needs a nonempty sample"));
    }
    let mut s = 0.0;
    for (x, &y) in data.x.rows().into_iter().zip(data.y.iter()) {
        let r = p.predict(x) - y;
        s += r * r;
    }
    Ok(s / data.len() as f64)
}

/// Mean squared deviation from `targets` over the evaluation points.
pub fn generalization_error(
    p: &impl Predict,
    eval_points: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<f64> {
    if eval_points.nrows() == 0 {
        return Err(Error::invalid(
            "evaluation measure needs at least one point",
        ));
    }
    if eval_points.nrows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: eval_points.nrows(),
            got: targets.len(),
        });
    }
    let mut s = 0.0;
    for (x, &t) in eval_points.rows().into_iter().zip(targets.iter()) {
        let r = p.predict(x) - t;
        s += r * r;
    }
    Ok(s / targets.len() as f64)
}

pub fn risk_report(
    p: &impl Predict,
    data: &Dataset,
    eval_points: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    target_mode: TargetMode,
) -> Result<RiskReport> {
    Ok(RiskReport {
        empirical_risk: empirical_risk(p, data)?,
        generalization_error: generalization_error(p, eval_points, targets)?,
        target_mode,
    })
}

/// Deterministic full-batch counterpart of the stochastic recursion:
/// the gradient at every iteration averages over the whole sample, so the
/// result does not depend on any seed. Stochastic trajectories average to
/// this one over index streams.
pub fn batch_sample_iteration(
    data: &Dataset,
    factor: &Arc<NystromFactor>,
    schedule: &StepSchedule,
    iterations: usize,
    snapshot_stride: usize,
) -> Result<Trajectory> {
    if iterations == 0 {
        return Err(Error::invalid("iteration count T must be >= 1"));
    }
    if snapshot_stride == 0 {
        return Err(Error::invalid("snapshot stride must be >= 1"));
    }
    if data.is_empty() {
        return Err(Error::invalid("dataset must be nonempty"));
    }
    let n = data.len();
    let rank = factor.rank();
    let features = factor.projected_features(data.x.view());

    let mut c = Array1::<f64>::zeros(rank);
    let mut grad = Array1::<f64>::zeros(rank);
    let mut snapshots = Vec::new();
    for t in 1..=iterations {
        grad.fill(0.0);
        for i in 0..n {
            let a = features.row(i);
            let residual = dot(a, c.view()) - data.y[i];
            for p in 0..rank {
                grad[p] += residual * a[p];
            }
        }
        let scale = schedule.eta_at(t) / n as f64;
        for p in 0..rank {
            c[p] -= scale * grad[p];
        }
        if t % snapshot_stride == 0 || t == iterations {
            snapshots.push(Snapshot::from_parts(t, c.clone()));
        }
    }
    Ok(Trajectory::from_parts(Arc::clone(factor), snapshots))
}

/// Kernel ridge regression: coefficients `(K + n lambda I)^-1 y`, solved by
/// Cholesky factorization. Exact baseline at desk scale.
pub fn krr_solve(data: &Dataset, kernel: &KernelSpec, lambda: f64) -> Result<KrrModel> {
    if data.is_empty() {
        return Err(Error::invalid("dataset must be nonempty"));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let n = data.len();
    let k = kernel.gram_sym(data.x.view())?;
    let shift = n as f64 * lambda;
    let mut a = nalgebra::DMatrix::from_fn(n, n, |i, j| k[[i, j]]);
    for i in 0..n {
        a[(i, i)] += shift;
    }
    let chol = nalgebra::Cholesky::new(a)
        .ok_or_else(|| Error::Numerical("K + n*lambda*I is not positive definite".into()))?;
    let rhs = nalgebra::DVector::from_fn(n, |i, _| data.y[i]);
    let alpha_na = chol.solve(&rhs);
    let alpha = Array1::from_iter(alpha_na.iter().cloned());
    Ok(KrrModel {
        kernel: kernel.clone(),
        points: Arc::new(data.x.clone()),
        alpha,
    })
}

/// A fitted ridge model: `f(x) = sum_i alpha_i K(x, x_i)`.
#[derive(Debug, Clone)]
pub struct KrrModel {
    kernel: KernelSpec,
    points: Arc<Array2<f64>>,
    alpha: Array1<f64>,
}

impl KrrModel {
    pub fn alpha(&self) -> ArrayView1<'_, f64> {
        self.alpha.view()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }
}

impl Predict for KrrModel {
    fn predict(&self, x: ArrayView1<f64>) -> f64 {
        let mut s = 0.0;
        for (i, xi) in self.points.rows().into_iter().enumerate() {
            s += self.alpha[i] * self.kernel.eval_unchecked(xi, x);
        }
        s
    }
}

/// Clamp a prediction to `[-level, level]`.
pub fn truncate(value: f64, level: f64) -> f64 {
    debug_assert!(level > 0.0);
    value.clamp(-level, level)
}

/// A predictor with truncated output.
#[derive(Debug, Clone)]
pub struct Truncated<P> {
    inner: P,
    level: f64,
}

impl<P> Truncated<P> {
    pub fn new(inner: P, level: f64) -> Result<Self> {
        if !level.is_finite() || level <= 0.0 {
            return Err(Error::invalid("truncation level must be positive"));
        }
        Ok(Truncated { inner, level })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

impl<P: Predict> Predict for Truncated<P> {
    fn predict(&self, x: ArrayView1<f64>) -> f64 {
        truncate(self.inner.predict(x), self.level)
    }
}

/// Step-size grid and truncation level for hold-out selection.
#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub grid: Vec<f64>,
    pub truncation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvRow {
    pub eta: f64,
    pub validation_mse: f64,
}

#[derive(Debug)]
pub struct CvOutcome {
    pub chosen_index: usize,
    pub rows: Vec<CvRow>,
    pub model: Truncated<Predictor>,
}

impl CvOutcome {
    pub fn chosen_eta(&self) -> f64 {
        self.rows[self.chosen_index].eta
    }
}

/// Train one model per candidate step-size with the *same* recorded index
/// stream, evaluate truncated predictions on the held-out pairs, and return
/// the minimizer (ties broken toward the smaller step-size) as a truncated
/// predictor.
pub fn cross_validate_step_size(
    cv: &CvConfig,
    train_data: &Dataset,
    validation: &Dataset,
    factor: &Arc<NystromFactor>,
    template: &TrainConfig,
) -> Result<CvOutcome> {
    if cv.grid.is_empty() {
        return Err(Error::invalid("cross-validation grid must be nonempty"));
    }
    if !cv.truncation.is_finite() || cv.truncation <= 0.0 {
        return Err(Error::invalid("truncation level must be positive"));
    }
    if validation.is_empty() {
        return Err(Error::invalid("validation set must be nonempty"));
    }
    let kappa2 = factor.kernel().kappa().powi(2);
    for &eta in &cv.grid {
        if !eta.is_finite() || eta <= 0.0 || eta > kappa2 {
            return Err(Error::invalid(format!(
                "grid step-size {eta} must lie in (0, kappa^2 = {kappa2}]"
            )));
        }
    }

    let indices = crate::sgm::sample_index_stream(
        train_data.len(),
        template.batch_size * template.iterations,
        template.seed,
    );

    let mut rows = Vec::with_capacity(cv.grid.len());
    let mut predictors = Vec::with_capacity(cv.grid.len());
    for &eta in &cv.grid {
        let mut config = template.clone();
        config.schedule = StepSchedule {
            eta1: eta,
            theta: template.schedule.theta,
        };
        let trajectory = crate::sgm::train_with_indices(&config, train_data, factor, &indices)?;
        let predictor = trajectory.final_predictor();
        let truncated = Truncated::new(predictor.clone(), cv.truncation)?;
        let mut mse = 0.0;
        for (x, &y) in validation.x.rows().into_iter().zip(validation.y.iter()) {
            let r = truncated.predict(x) - y;
            mse += r * r;
        }
        mse /= validation.len() as f64;
        rows.push(CvRow {
            eta,
            validation_mse: mse,
        });
        predictors.push(predictor);
    }

    let mut chosen = 0;
    for i in 1..rows.len() {
        let better = rows[i].validation_mse < rows[chosen].validation_mse
            || (rows[i].validation_mse == rows[chosen].validation_mse
                && rows[i].eta < rows[chosen].eta);
        if better {
            chosen = i;
        }
    }
    let model = Truncated::new(predictors[chosen].clone(), cv.truncation)?;
    Ok(CvOutcome {
        chosen_index: chosen,
        rows,
        model,
    })
}

/// Classic (unprojected) kernel SGM: one coefficient per training point,
/// `alpha[j] -= (eta_t / b) * (f_t(x_j) - y_j)` for each drawn index. Keeps
/// the full Gram matrix, so memory is quadratic in `n`.
pub fn plain_sgm_train(
    data: &Dataset,
    kernel: &KernelSpec,
    schedule: &StepSchedule,
    batch_size: usize,
    iterations: usize,
    snapshot_stride: usize,
    indices: &[usize],
) -> Result<PlainSgmTrajectory> {
    if iterations == 0 || batch_size == 0 || snapshot_stride == 0 {
        return Err(Error::invalid(
            "batch size, iterations and stride must be >= 1",
        ));
    }
    if indices.len() != batch_size * iterations {
        return Err(Error::invalid(format!(
            "index stream has length {}, expected {}",
            indices.len(),
            batch_size * iterations
        )));
    }
    schedule_guard(schedule, kernel.kappa())?;
    let n = data.len();
    let gram = kernel.gram_sym(data.x.view())?;

    let mut alpha = Array1::<f64>::zeros(n);
    let mut residuals = vec![0.0f64; batch_size];
    let mut snapshots = Vec::new();
    for t in 1..=iterations {
        let batch = &indices[(t - 1) * batch_size..t * batch_size];
        for (slot, &j) in batch.iter().enumerate() {
            if j >= n {
                return Err(Error::invalid(format!(
                    "batch index {j} out of range for n={n}"
                )));
            }
            residuals[slot] = dot(gram.row(j), alpha.view()) - data.y[j];
        }
        let scale = schedule.eta_at(t) / batch_size as f64;
        for (slot, &j) in batch.iter().enumerate() {
            alpha[j] -= scale * residuals[slot];
        }
        if t % snapshot_stride == 0 || t == iterations {
            snapshots.push((t, alpha.clone()));
        }
    }
    Ok(PlainSgmTrajectory {
        kernel: kernel.clone(),
        points: Arc::new(data.x.clone()),
        snapshots,
    })
}

fn schedule_guard(schedule: &StepSchedule, kappa: f64) -> Result<()> {
    if schedule.eta1 < 0.0 || schedule.eta1 * kappa * kappa > 1.0 {
        return Err(Error::invalid("step size out of the stable range"));
    }
    Ok(())
}

/// Recorded states of a classic-SGM run.
#[derive(Debug, Clone)]
pub struct PlainSgmTrajectory {
    kernel: KernelSpec,
    points: Arc<Array2<f64>>,
    snapshots: Vec<(usize, Array1<f64>)>,
}

impl PlainSgmTrajectory {
    pub fn snapshots(&self) -> &[(usize, Array1<f64>)] {
        &self.snapshots
    }

    pub fn model_at(&self, index: usize) -> PlainSgmModel {
        PlainSgmModel {
            kernel: self.kernel.clone(),
            points: Arc::clone(&self.points),
            alpha: self.snapshots[index].1.clone(),
        }
    }

    pub fn final_model(&self) -> PlainSgmModel {
        self.model_at(self.snapshots.len() - 1)
    }
}

/// Classic-SGM model: `f(x) = sum_i alpha_i K(x, x_i)`.
#[derive(Debug, Clone)]
pub struct PlainSgmModel {
    kernel: KernelSpec,
    points: Arc<Array2<f64>>,
    alpha: Array1<f64>,
}

impl Predict for PlainSgmModel {
    fn predict(&self, x: ArrayView1<f64>) -> f64 {
        let mut s = 0.0;
        for (i, xi) in self.points.rows().into_iter().enumerate() {
            s += self.alpha[i] * self.kernel.eval_unchecked(xi, x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{eval_grid, gen_toy, EvalMeasure};
    use crate::nystrom::{select_landmarks, LandmarkStrategy, DEFAULT_RTOL};
    use ndarray::{arr1, arr2};

    struct ZeroPredictor;
    impl Predict for ZeroPredictor {
        fn predict(&self, _x: ArrayView1<f64>) -> f64 {
            0.0
        }
    }

    struct FnPredictor<F: Fn(f64) -> f64>(F);
    impl<F: Fn(f64) -> f64> Predict for FnPredictor<F> {
        fn predict(&self, x: ArrayView1<f64>) -> f64 {
            (self.0)(x[0])
        }
    }

    fn single_point() -> (Dataset, Arc<NystromFactor>) {
        let data = Dataset::new(arr2(&[[0.0]]), arr1(&[1.0]), None).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let factor = NystromFactor::build(kernel, &data, &[0], DEFAULT_RTOL).unwrap();
        (data, Arc::new(factor))
    }

    #[test]
    fn empirical_risk_zero_predictor() {
        let data = Dataset::new(arr2(&[[0.0], [1.0]]), arr1(&[1.0, -1.0]), None).unwrap();
        assert_eq!(empirical_risk(&ZeroPredictor, &data).unwrap(), 1.0);
    }

    #[test]
    fn empirical_risk_interpolant_is_zero() {
        let data = gen_toy(30, 1).unwrap();
        let ys = data.y.clone();
        let xs = data.x.clone();
        let p = FnPredictor(move |x| {
            let i = xs.column(0).iter().position(|&v| v == x).unwrap();
            ys[i]
        });
        assert_eq!(empirical_risk(&p, &data).unwrap(), 0.0);
    }

    #[test]
    fn empirical_risk_matches_independent_sum() {
        let data = gen_toy(100, 21).unwrap();
        // Independent oracle: plain summation of y_i^2 / n.
        let expect = data.y.iter().map(|y| y * y).sum::<f64>() / 100.0;
        let got = empirical_risk(&ZeroPredictor, &data).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn generalization_error_of_truth_is_zero() {
        let (pts, targets) = eval_grid(500, EvalMeasure::MidpointGrid).unwrap();
        let p = FnPredictor(crate::data::toy_target);
        assert_eq!(
            generalization_error(&p, pts.view(), targets.view()).unwrap(),
            0.0
        );
    }

    #[test]
    fn generalization_error_zero_predictor_matches_integral() {
        // int_0^1 (|x-1/2| - 1/2)^2 dx = 2 * int_{1/2}^1 (x-1)^2 dx = 1/12.
        let (pts, targets) = eval_grid(2000, EvalMeasure::MidpointGrid).unwrap();
        let got = generalization_error(&ZeroPredictor, pts.view(), targets.view()).unwrap();
        assert!((got - 1.0 / 12.0).abs() < 1e-3, "got {got}");
    }

    #[test]
    fn generalization_error_constant_shift_is_suboptimal() {
        let (pts, targets) = eval_grid(400, EvalMeasure::MidpointGrid).unwrap();
        // Optimal constant is the mean target value.
        let opt = targets.sum() / targets.len() as f64;
        let best =
            generalization_error(&FnPredictor(move |_| opt), pts.view(), targets.view()).unwrap();
        for c in [-1.0, -0.5, 0.0, 0.3, 1.0] {
            let e =
                generalization_error(&FnPredictor(move |_| c), pts.view(), targets.view()).unwrap();
            assert!(e >= best - 1e-15, "c={c}: {e} < {best}");
        }
    }

    #[test]
    fn generalization_error_length_mismatch() {
        let (pts, targets) = eval_grid(10, EvalMeasure::MidpointGrid).unwrap();
        let bad = targets.slice(ndarray::s![..5]);
        assert!(generalization_error(&ZeroPredictor, pts.view(), bad).is_err());
    }

    #[test]
    fn batch_iteration_single_point_hand_values() {
        let (data, factor) = single_point();
        let traj =
            batch_sample_iteration(&data, &factor, &StepSchedule::constant(0.5), 2, 1).unwrap();
        let g2 = traj.predictor_at(0);
        let g3 = traj.predictor_at(1);
        assert!((g2.predict(data.x.row(0)) - 0.5).abs() < 1e-15);
        assert!((g3.predict(data.x.row(0)) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn batch_iteration_zero_step_stays_zero() {
        let (data, factor) = single_point();
        let traj =
            batch_sample_iteration(&data, &factor, &StepSchedule::constant(0.0), 5, 1).unwrap();
        for (_, p) in traj.iter_predictors() {
            assert_eq!(p.predict(data.x.row(0)), 0.0);
        }
    }

    #[test]
    fn full_batch_stream_reproduces_batch_iteration_exactly() {
        let data = gen_toy(12, 3).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let idx = select_landmarks(12, 5, LandmarkStrategy::FirstM, 0).unwrap();
        let factor = Arc::new(NystromFactor::build(kernel, &data, &idx, DEFAULT_RTOL).unwrap());
        let schedule = StepSchedule::constant(0.4);
        let iterations = 20;

        let batch = batch_sample_iteration(&data, &factor, &schedule, iterations, 5).unwrap();

        // Degenerate stream: every batch is the full dataset in index order.
        let full: Vec<usize> = (0..iterations).flat_map(|_| 0..data.len()).collect();
        let config = TrainConfig::new(schedule, data.len(), iterations, 0).with_snapshot_stride(5);
        let stochastic = crate::sgm::train_with_indices(&config, &data, &factor, &full).unwrap();

        for (a, b) in batch.snapshots().iter().zip(stochastic.snapshots().iter()) {
            assert_eq!(a.steps(), b.steps());
            for (x, y) in a.coefficients().iter().zip(b.coefficients().iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn averaged_streams_approach_batch_iteration() {
        // Small-scale unbiasedness check; the acceptance suite runs the
        // full-size version.
        let data = gen_toy(8, 5).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let idx = select_landmarks(8, 4, LandmarkStrategy::FirstM, 0).unwrap();
        let factor = Arc::new(NystromFactor::build(kernel, &data, &idx, DEFAULT_RTOL).unwrap());
        let schedule = StepSchedule::constant(0.1);
        let t = 10;

        let reference = batch_sample_iteration(&data, &factor, &schedule, t, t).unwrap();
        let probe = arr1(&[0.3]);
        let want = reference.final_predictor().predict(probe.view());

        let streams = 2000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for s in 0..streams {
            let config = TrainConfig::new(schedule, 1, t, 1000 + s as u64);
            let traj = crate::sgm::train(&config, &data, &factor).unwrap();
            let v = traj.final_predictor().predict(probe.view());
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / streams as f64;
        let var = (sumsq - sum * sum / streams as f64) / (streams as f64 - 1.0);
        let se = (var / streams as f64).sqrt();
        assert!(
            (mean - want).abs() <= 3.0 * se,
            "mean {mean} want {want} se {se}"
        );
    }

    #[test]
    fn krr_single_point_hand_value() {
        let data = Dataset::new(arr2(&[[0.0]]), arr1(&[1.0]), None).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let m = krr_solve(&data, &kernel, 1.0).unwrap();
        assert!((m.predict(data.x.row(0)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn krr_heavy_shrinkage_vanishes() {
        let data = Dataset::new(arr2(&[[0.0]]), arr1(&[1.0]), None).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let m = krr_solve(&data, &kernel, 1e6).unwrap();
        assert!(m.predict(data.x.row(0)).abs() <= 1e-5);
    }

    #[test]
    fn krr_zero_targets_give_zero_predictor() {
        let mut data = gen_toy(20, 2).unwrap();
        data.y.fill(0.0);
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let m = krr_solve(&data, &kernel, 0.01).unwrap();
        for x in data.x.rows() {
            assert_eq!(m.predict(x), 0.0);
        }
    }

    #[test]
    fn krr_residual_is_small() {
        let data = gen_toy(60, 4).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let lambda = 0.01;
        let m = krr_solve(&data, &kernel, lambda).unwrap();
        let k = kernel.gram_sym(data.x.view()).unwrap();
        let n = data.len();
        let mut resid = 0.0;
        let mut ynorm = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += k[[i, j]] * m.alpha()[j];
            }
            row += n as f64 * lambda * m.alpha()[i];
            resid += (row - data.y[i]).powi(2);
            ynorm += data.y[i] * data.y[i];
        }
        assert!(resid.sqrt() <= 1e-8 * ynorm.sqrt());
    }

    #[test]
    fn krr_rank_deficient_without_ridge_fails_numerically() {
        // Duplicated points make K singular; lambda = 0 cannot be solved.
        let data =
            Dataset::new(arr2(&[[0.3], [0.3], [0.7]]), arr1(&[1.0, 1.0, 0.0]), None).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        match krr_solve(&data, &kernel, 0.0) {
            Err(Error::Numerical(_)) => {}
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(3.0, 2.0), 2.0);
        assert_eq!(truncate(-5.0, 2.0), -2.0);
        assert_eq!(truncate(0.3, 2.0), 0.3);
    }

    #[test]
    fn risk_report_combines_both_measures() {
        let data = gen_toy(50, 6).unwrap();
        let (pts, targets) = eval_grid(200, EvalMeasure::MidpointGrid).unwrap();
        let report = risk_report(
            &ZeroPredictor,
            &data,
            pts.view(),
            targets.view(),
            TargetMode::Noiseless,
        )
        .unwrap();
        assert_eq!(report.target_mode, TargetMode::Noiseless);
        assert_eq!(
            report.empirical_risk,
            empirical_risk(&ZeroPredictor, &data).unwrap()
        );
        assert_eq!(
            report.generalization_error,
            generalization_error(&ZeroPredictor, pts.view(), targets.view()).unwrap()
        );
        assert!(report.empirical_risk >= 0.0 && report.generalization_error >= 0.0);
    }

    #[test]
    fn cv_single_candidate_is_chosen() {
        let data = gen_toy(40, 8).unwrap();
        let train = data.slice(0, 30).unwrap();
        let val = data.slice(30, 40).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let idx = select_landmarks(30, 6, LandmarkStrategy::FirstM, 0).unwrap();
        let factor = Arc::new(NystromFactor::build(kernel, &train, &idx, DEFAULT_RTOL).unwrap());
        let template = TrainConfig::new(StepSchedule::constant(0.0), 1, 50, 7);
        let cv = CvConfig {
            grid: vec![0.05],
            truncation: 1.0,
        };
        let out = cross_validate_step_size(&cv, &train, &val, &factor, &template).unwrap();
        assert_eq!(out.chosen_index, 0);
        assert_eq!(out.chosen_eta(), 0.05);
        assert_eq!(out.rows.len(), 1);
    }

    #[test]
    fn cv_prefers_learning_over_near_zero_step() {
        let data = gen_toy(120, 13).unwrap();
        let train = data.slice(0, 90).unwrap();
        let val = data.slice(90, 120).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let idx = select_landmarks(90, 10, LandmarkStrategy::FirstM, 0).unwrap();
        let factor = Arc::new(NystromFactor::build(kernel, &train, &idx, DEFAULT_RTOL).unwrap());
        let template = TrainConfig::new(StepSchedule::constant(0.0), 1, 900, 3);
        let good = 0.05;
        let cv = CvConfig {
            grid: vec![good, 1e-9],
            truncation: 1.0,
        };
        let out = cross_validate_step_size(&cv, &train, &val, &factor, &template).unwrap();

        // The near-zero candidate is effectively the zero predictor.
        let zero_mse = val.y.iter().map(|y| y * y).sum::<f64>() / val.len() as f64;
        let near_zero_row = out.rows.iter().find(|r| r.eta == 1e-9).unwrap();
        assert!((near_zero_row.validation_mse - zero_mse).abs() < 1e-6);
        let good_row = out.rows.iter().find(|r| r.eta == good).unwrap();
        if good_row.validation_mse < near_zero_row.validation_mse {
            assert_eq!(out.chosen_eta(), good);
        } else {
            assert_eq!(out.chosen_eta(), 1e-9);
        }
    }

    #[test]
    fn cv_is_order_invariant_up_to_tie_break() {
        let data = gen_toy(60, 17).unwrap();
        let train = data.slice(0, 45).unwrap();
        let val = data.slice(45, 60).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let idx = select_landmarks(45, 8, LandmarkStrategy::FirstM, 0).unwrap();
        let factor = Arc::new(NystromFactor::build(kernel, &train, &idx, DEFAULT_RTOL).unwrap());
        let template = TrainConfig::new(StepSchedule::constant(0.0), 1, 200, 5);
        let cv_a = CvConfig {
            grid: vec![0.002, 0.01, 0.05],
            truncation: 1.0,
        };
        let cv_b = CvConfig {
            grid: vec![0.05, 0.002, 0.01],
            truncation: 1.0,
        };
        let a = cross_validate_step_size(&cv_a, &train, &val, &factor, &template).unwrap();
        let b = cross_validate_step_size(&cv_b, &train, &val, &factor, &template).unwrap();
        assert_eq!(a.chosen_eta(), b.chosen_eta());
    }

    #[test]
    fn cv_rejects_bad_grids() {
        let data = gen_toy(20, 1).unwrap();
        let train = data.slice(0, 15).unwrap();
        let val = data.slice(15, 20).unwrap();
        let kernel = KernelSpec::gaussian(0.2).unwrap();
        let idx = select_landmarks(15, 4, LandmarkStrategy::FirstM, 0).unwrap();
        let factor = Arc::new(NystromFactor::build(kernel, &train, &idx, DEFAULT_RTOL).unwrap());
        let template = TrainConfig::new(StepSchedule::constant(0.0), 1, 10, 0);
        let empty = CvConfig {
            grid: vec![],
            truncation: 1.0,
        };
        assert!(cross_validate_step_size(&empty, &train, &val, &factor, &template).is_err());
        let too_big = CvConfig {
            grid: vec![2.0],
            truncation: 1.0,
        };
        assert!(cross_validate_step_size(&too_big, &train, &val, &factor, &template).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn truncate_idempotent_and_odd(v in -100.0f64..100.0, level in 0.01f64..10.0) {
                let once = truncate(v, level);
                prop_assert_eq!(truncate(once, level), once);
                prop_assert_eq!(truncate(-v, level), -once);
                prop_assert!(once.abs() <= level);
            }
        }
    }
}
