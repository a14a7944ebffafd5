//! Kernel evaluation and Gram-matrix construction.
//!
//! All arithmetic is in `f64`; near-singular Gaussian Gram matrices need the
//! precision. The Gaussian kernel is `exp(-||x - x'||^2 / (2 sigma^2))` for
//! points of any dimension.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// A kernel family together with its parameters and the bound `kappa`
/// satisfying `K(x, x) <= kappa^2` on the input domain.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `K(x, x') = exp(-||x - x'||^2 / (2 sigma^2))`; `kappa` is always 1.
    Gaussian { sigma: f64 },
    /// `K(x, x') = <x, x'>`; `kappa` must be supplied as a domain bound.
    Linear { kappa: f64 },
    /// `K(x, x') = (<x, x'> + offset)^degree`; `kappa` is a domain bound.
    Polynomial {
        degree: u32,
        offset: f64,
        kappa: f64,
    },
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid(format!(
                "gaussian bandwidth must be positive, got {sigma}"
            )));
        }
        Ok(KernelSpec::Gaussian { sigma })
    }

    pub fn linear(kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        Ok(KernelSpec::Linear { kappa })
    }

    pub fn polynomial(degree: u32, offset: f64, kappa: f64) -> Result<Self> {
        if degree < 1 {
            return Err(Error::invalid("polynomial degree must be >= 1"));
        }
        check_kappa(kappa)?;
        Ok(KernelSpec::Polynomial {
            degree,
            offset,
            kappa,
        })
    }

    /// The bound `kappa` with `K(x, x) <= kappa^2`.
    pub fn kappa(&self) -> f64 {
        match self {
            KernelSpec::Gaussian { .. } => 1.0,
            KernelSpec::Linear { kappa } => *kappa,
            KernelSpec::Polynomial { kappa, .. } => *kappa,
        }
    }

    /// Evaluate `K(x, x')`. The two points must share a dimension.
    pub fn eval(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self {
            KernelSpec::Gaussian { sigma } => {
                let mut sq = 0.0;
                for (a, b) in x.iter().zip(y.iter()) {
                    let d = a - b;
                    sq += d * d;
                }
                (-sq / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Linear { .. } => dot_views(x, y),
            KernelSpec::Polynomial { degree, offset, .. } => {
                (dot_views(x, y) + offset).powi(*degree as i32)
            }
        }
    }

    /// Cross Gram matrix with entry `(i, j) = K(a[i], b[j])`, rows as points.
    pub fn gram(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_points(a)?;
        self.check_points(b)?;
        if a.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.ncols(),
                got: b.ncols(),
            });
        }
        let mut k = Array2::zeros((a.nrows(), b.nrows()));
        for i in 0..a.nrows() {
            for j in 0..b.nrows() {
                k[[i, j]] = self.eval_unchecked(a.row(i), b.row(j));
            }
        }
        Ok(k)
    }

    /// Symmetric Gram matrix of one point set. Each pair is evaluated once
    /// and mirrored, so the result equals its transpose exactly.
    pub fn gram_sym(&self, a: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_points(a)?;
        let n = a.nrows();
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = self.eval_unchecked(a.row(i), a.row(j));
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        Ok(k)
    }

    fn check_points(&self, a: ArrayView2<f64>) -> Result<()> {
        if a.nrows() == 0 {
            return Err(Error::invalid("point list must be nonempty"));
        }
        if a.ncols() == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        Ok(())
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa < 1.0 {
        return Err(Error::invalid(format!(
            "kappa must be finite and >= 1, got {kappa}"
        )));
    }
    Ok(())
}

fn dot_views(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let mut s = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        s += a * b;
    }
    s
}
