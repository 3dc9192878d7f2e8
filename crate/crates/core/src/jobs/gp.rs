//! Gaussian process regression with a squared-exponential kernel.

use thiserror::Error;

use crate::numeric::Scalar;

pub const DEFAULT_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("no training points")]
    NoData,
    #[error("expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("kernel matrix is not positive definite even with jitter")]
    NotPositiveDefinite,
    #[error("length scales must be positive")]
    BadLengthScale,
}

/// k(x, x') = s^2 exp(-1/2 sum_d ((x_d - x'_d) / l_d)^2)
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredExponential<T> {
    pub signal_variance: T,
    pub length_scales: Vec<T>,
}

impl<T: Scalar> SquaredExponential<T> {
    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        let r2 = a
            .iter()
            .zip(b)
            .zip(&self.length_scales)
            .fold(T::zero(), |acc, ((x, y), l)| acc + ((*x - *y) / *l).powi(2));
        self.signal_variance * (-(r2 / T::lit(2.0))).exp()
    }
}

/// Lower-triangular L with L L^T = A, or None if A is not positive definite.
pub fn cholesky<T: Scalar>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum = sum - l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > T::zero()) {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves L y = b for lower-triangular L.
pub fn forward_substitute<T: Scalar>(l: &[Vec<T>], b: &[T]) -> Vec<T> {
    let n = b.len();
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    y
}

/// Solves L^T x = y for lower-triangular L.
pub fn back_substitute<T: Scalar>(l: &[Vec<T>], y: &[T]) -> Vec<T> {
    let n = y.len();
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

#[derive(Debug, Clone)]
pub struct GaussianProcess<T> {
    kernel: SquaredExponential<T>,
    x: Vec<Vec<T>>,
    chol: Vec<Vec<T>>,
    alpha: Vec<T>,
    y_mean: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> GaussianProcess<T> {
    /// Fits on `x` (one row per point) and `y`; `jitter` is added to the
    /// kernel diagonal. Targets are centred on their mean.
    pub fn fit(
        kernel: SquaredExponential<T>,
        x: Vec<Vec<T>>,
        y: &[T],
        jitter: T,
    ) -> Result<Self, GpError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(GpError::NoData);
        }
        if kernel.length_scales.iter().any(|l| !(*l > T::zero())) {
            return Err(GpError::BadLengthScale);
        }
        let d = kernel.length_scales.len();
        if let Some(row) = x.iter().find(|r| r.len() != d) {
            return Err(GpError::Dimension {
                expected: d,
                got: row.len(),
            });
        }
        let n = x.len();
        let mut k = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                k[i][j] = kernel.eval(&x[i], &x[j]);
            }
            k[i][i] = k[i][i] + jitter;
        }
        let chol = cholesky(&k).ok_or(GpError::NotPositiveDefinite)?;
        let y_mean =
            y.iter().fold(T::zero(), |a, b| a + *b) / T::from_usize(n).expect("count fits scalar");
        let centred: Vec<T> = y.iter().map(|v| *v - y_mean).collect();
        let alpha = back_substitute(&chol, &forward_substitute(&chol, &centred));
        Ok(Self {
            kernel,
            x,
            chol,
            alpha,
            y_mean,
        })
    }

    pub fn prior_variance(&self) -> T {
        self.kernel.signal_variance
    }

    /// Posterior mean and variance; variance is clamped at zero.
    pub fn predict(&self, x: &[T]) -> Result<Prediction<T>, GpError> {
        if x.len() != self.kernel.length_scales.len() {
            return Err(GpError::Dimension {
                expected: self.kernel.length_scales.len(),
                got: x.len(),
            });
        }
        let ks: Vec<T> = self.x.iter().map(|xi| self.kernel.eval(xi, x)).collect();
        let mean = self.y_mean
            + ks.iter()
                .zip(&self.alpha)
                .fold(T::zero(), |a, (k, al)| a + *k * *al);
        let v = forward_substitute(&self.chol, &ks);
        let reduction = v.iter().fold(T::zero(), |a, vi| a + *vi * *vi);
        let variance = (self.kernel.eval(x, x) - reduction).max(T::zero());
        Ok(Prediction { mean, variance })
    }
}
