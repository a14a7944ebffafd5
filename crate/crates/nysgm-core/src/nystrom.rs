//! Landmark selection and the factor `R` with `R R^T = pinv(K_mm)`.
//!
//! `R` realizes the projection onto the span of the landmark functions in
//! coefficient form: the functions `phi_p = sum_i R[i, p] K_{landmark_i}`
//! are orthonormal, and projected-space coordinates of any point are
//! `R^T k(landmarks, x)`.
//!
//! `R` is unique only up to orthogonal column transforms; comparisons must
//! go through `R R^T`, never `R` itself.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample as sample_without_replacement;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::rng;

/// How landmark indices are chosen from the training set.
///
/// `FirstM` takes indices `0..m`, matching the convention that landmarks are
/// the first `m` points of the i.i.d. sample; since the sample is exchangeable
/// this is distributionally uniform. `UniformWithoutReplacement` is for data
/// whose row order carries meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandmarkStrategy {
    FirstM,
    UniformWithoutReplacement,
}

/// Choose `m` distinct landmark indices out of `n`.
pub fn select_landmarks(
    n: usize,
    m: usize,
    strategy: LandmarkStrategy,
    seed: u64,
) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "subsampling level m={m} must satisfy 1 <= m <= n={n}"
        )));
    }
    match strategy {
        LandmarkStrategy::FirstM => Ok((0..m).collect()),
        LandmarkStrategy::UniformWithoutReplacement => {
            let mut rng = rng::seeded(seed, rng::STREAM_LANDMARKS);
            let mut idx = sample_without_replacement(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            Ok(idx)
        }
    }
}

/// Default relative eigenvalue cutoff. Gaussian Gram matrices go numerically
/// rank-deficient well above machine epsilon.
pub const DEFAULT_RTOL: f64 = 1e-10;

/// Factor a symmetric PSD matrix `K` as `R R^T = pinv(K)` at the numerical
/// rank determined by `rtol`: eigenpairs with `lambda > rtol * lambda_max`
/// are kept and `R = Q_kept diag(lambda^-1/2)`.
pub fn pseudo_sqrt_factor(k_mm: ArrayView2<f64>, rtol: f64) -> Result<(Array2<f64>, usize)> {
    let m = k_mm.nrows();
    if m == 0 || k_mm.ncols() != m {
        return Err(Error::invalid("matrix must be square with m >= 1"));
    }
    if !rtol.is_finite() || rtol <= 0.0 {
        return Err(Error::invalid("rtol must be positive"));
    }
    for i in 0..m {
        for j in (i + 1)..m {
            if (k_mm[[i, j]] - k_mm[[j, i]]).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    k_mm[[i, j]],
                    k_mm[[j, i]]
                )));
            }
        }
    }

    let dm = nalgebra::DMatrix::from_fn(m, m, |i, j| k_mm[[i, j]]);
    let eig = nalgebra::SymmetricEigen::new(dm);
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    if lambda_max.is_nan() || lambda_max <= 0.0 {
        return Err(Error::Degenerate(
            "matrix has no positive eigenvalues (rank 0)".into(),
        ));
    }
    let cutoff = rtol * lambda_max;
    let kept: Vec<usize> = (0..m).filter(|&p| eig.eigenvalues[p] > cutoff).collect();
    if kept.is_empty() {
        return Err(Error::Degenerate(
            "all eigenvalues below cutoff (rank 0)".into(),
        ));
    }
    let rank = kept.len();
    let mut r = Array2::zeros((m, rank));
    for (col, &p) in kept.iter().enumerate() {
        let scale = 1.0 / eig.eigenvalues[p].sqrt();
        for i in 0..m {
            r[[i, col]] = eig.eigenvectors[(i, p)] * scale;
        }
    }
    Ok((r, rank))
}

/// Landmark set and projection factor for one training set.
#[derive(Debug, Clone)]
pub struct NystromFactor {
    kernel: KernelSpec,
    landmark_indices: Vec<usize>,
    landmarks: Array2<f64>,
    r: Array2<f64>,
    rank: usize,
    rtol: f64,
}

impl NystromFactor {
    /// Build the factor for the given landmark rows of `data`.
    pub fn build(
        kernel: KernelSpec,
        data: &Dataset,
        landmark_indices: &[usize],
        rtol: f64,
    ) -> Result<Self> {
        if landmark_indices.is_empty() {
            return Err(Error::invalid("at least one landmark required"));
        }
        if let Some(&bad) = landmark_indices.iter().find(|&&i| i >= data.len()) {
            return Err(Error::invalid(format!(
                "landmark index {bad} out of range for n={}",
                data.len()
            )));
        }
        let m = landmark_indices.len();
        let mut landmarks = Array2::zeros((m, data.dim()));
        for (row, &i) in landmark_indices.iter().enumerate() {
            landmarks.row_mut(row).assign(&data.x.row(i));
        }
        Self::from_points(kernel, landmarks, landmark_indices.to_vec(), rtol)
    }

    /// Build the factor directly from landmark points.
    pub fn from_points(
        kernel: KernelSpec,
        landmarks: Array2<f64>,
        landmark_indices: Vec<usize>,
        rtol: f64,
    ) -> Result<Self> {
        let k_mm = kernel.gram_sym(landmarks.view())?;
        let (r, rank) = pseudo_sqrt_factor(k_mm.view(), rtol)?;
        Ok(NystromFactor {
            kernel,
            landmark_indices,
            landmarks,
            r,
            rank,
            rtol,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn landmark_indices(&self) -> &[usize] {
        &self.landmark_indices
    }

    pub fn landmarks(&self) -> ArrayView2<'_, f64> {
        self.landmarks.view()
    }

    pub fn r_matrix(&self) -> ArrayView2<'_, f64> {
        self.r.view()
    }

    pub fn subsampling_level(&self) -> usize {
        self.landmarks.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rtol(&self) -> f64 {
        self.rtol
    }

    /// Coordinates of a point in the projected space: `R^T k(landmarks, x)`.
    ///
    /// Every prediction and every training update goes through this routine,
    /// so precomputed and on-the-fly paths produce identical bits.
    pub fn projected_coordinates_into(&self, x: ArrayView1<f64>, out: &mut Array1<f64>) {
        debug_assert_eq!(out.len(), self.rank);
        let m = self.landmarks.nrows();
        let mut k = Array1::zeros(m);
        for i in 0..m {
            k[i] = self.kernel.eval_unchecked(self.landmarks.row(i), x);
        }
        for p in 0..self.rank {
            let mut s = 0.0;
            for i in 0..m {
                s += self.r[[i, p]] * k[i];
            }
            out[p] = s;
        }
    }

    pub fn projected_coordinates(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.rank);
        self.projected_coordinates_into(x, &mut out);
        out
    }

    /// Coordinates for each row of `xs`, stacked as rows of a matrix.
    pub fn projected_features(&self, xs: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((xs.nrows(), self.rank));
        let mut buf = Array1::zeros(self.rank);
        for (i, x) in xs.rows().into_iter().enumerate() {
            self.projected_coordinates_into(x, &mut buf);
            out.row_mut(i).assign(&buf);
        }
        out
    }
}
