//! Approximate Bayesian computation baselines targeting
//! `ν_κ(x, y') ∝ p(x) p(y'|x) 1[‖y − y'‖ < κ]`.

mod mcmc;
mod smc;

use nalgebra::{DMatrix, DVector};

pub use mcmc::{run_abc_mcmc, AbcMcmcConfig};
pub use smc::{run_abc_smc, AbcSmcConfig};

/// Euclidean distance between observed and simulated data.
pub fn distance(y_obs: &[f64], y_sim: &[f64]) -> f64 {
    debug_assert_eq!(y_obs.len(), y_sim.len());
    y_obs
        .iter()
        .zip(y_sim)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `1[‖y_obs − y_sim‖ < κ]`.
pub fn abc_accept(y_obs: &[f64], y_sim: &[f64], kappa: f64) -> bool {
    distance(y_obs, y_sim) < kappa
}

/// An ABC tolerance with the Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcTarget {
    pub kappa: f64,
}

impl AbcTarget {
    pub fn accepts(&self, y_obs: &[f64], y_sim: &[f64]) -> bool {
        abc_accept(y_obs, y_sim, self.kappa)
    }
}

/// Systematic resampling: returns `N` ancestor indices for normalized
/// `weights`, using one uniform `u0 ∈ [0, 1)`.
pub fn systematic_resample(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut j = 0;
    for i in 0..n {
        let u = (u0 + i as f64) / n as f64 * total;
        while j < n - 1 && cum + weights[j] <= u {
            cum += weights[j];
            j += 1;
        }
        out.push(j);
    }
    out
}

/// Weighted mean and covariance (reliability weights) of the columns of `x`.
pub(crate) fn weighted_moments(x: &DMatrix<f64>, weights: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let d = x.nrows();
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    let mut mean = DVector::zeros(d);
    for (col, &wi) in x.column_iter().zip(&w) {
        mean += col * wi;
    }
    let mut cov = DMatrix::zeros(d, d);
    for (col, &wi) in x.column_iter().zip(&w) {
        if wi > 0.0 {
            let c = col - &mean;
            cov += &c * c.transpose() * wi;
        }
    }
    let sum_sq: f64 = w.iter().map(|v| v * v).sum();
    let denom = 1.0 - sum_sq;
    if denom > 0.0 {
        cov /= denom;
    }
    (mean, cov)
}

/// Running mean and covariance of a chain (Welford), with `1/(t-1)` normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningCovariance {
    count: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl RunningCovariance {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.scatter += &delta * delta2.transpose();
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mut c = &self.scatter / (self.count.max(2) as f64 - 1.0);
        crate::linalg::symmetrize(&mut c);
        c
    }
}
