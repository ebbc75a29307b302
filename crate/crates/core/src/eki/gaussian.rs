//! The classic ensemble Kalman iterate for additive Gaussian likelihoods
//! `y ~ N(H(x), R)` with a known forward map and noise covariance.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::eki::driver::{drive, Update};
use crate::eki::step::perturbed_move;
use crate::eki::{EkiConfig, RunResult};
use crate::ensemble::{column, cross_moments, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::JitterPolicy;
use crate::models::{LinearGaussianModel, SimulatorModel};

/// A model whose likelihood is `N(forward(x), noise_cov)`.
pub trait ForwardModel: SimulatorModel {
    fn forward(&self, x: &[f64]) -> Vec<f64>;

    fn noise_cov(&self) -> DMatrix<f64>;
}

impl ForwardModel for LinearGaussianModel {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        LinearGaussianModel::forward(self, x).iter().copied().collect()
    }

    fn noise_cov(&self) -> DMatrix<f64> {
        self.r.clone()
    }
}

/// Evaluates the forward map on every column.
pub fn forward_matrix(model: &dyn ForwardModel, params: &DMatrix<f64>) -> DMatrix<f64> {
    let dy = model.dim_y();
    let cols: Vec<Vec<f64>> = (0..params.ncols())
        .into_par_iter()
        .map(|i| model.forward(column(params, i)))
        .collect();
    DMatrix::from_iterator(dy, params.ncols(), cols.into_iter().flatten())
}

fn check(ensemble: &Ensemble, forward_evals: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
    if forward_evals.ncols() != ensemble.n() {
        return Err(Error::DimensionMismatch {
            what: "forward evaluations",
            expected: ensemble.n(),
            got: forward_evals.ncols(),
        });
    }
    if r.nrows() != forward_evals.nrows() || r.ncols() != forward_evals.nrows() {
        return Err(Error::DimensionMismatch {
            what: "noise covariance",
            expected: forward_evals.nrows(),
            got: r.nrows(),
        });
    }
    Ok(())
}

/// Single ensemble Kalman filter analysis step:
/// `xᵢ ← xᵢ + C^{xH} (C^{HH} + R)⁻¹ (y − H(xᵢ) − ηᵢ)`, `ηᵢ ~ N(0, R)`.
pub fn enkf_update(
    ensemble: &Ensemble,
    forward_evals: &DMatrix<f64>,
    observed: &DVector<f64>,
    r: &DMatrix<f64>,
    jitter: &JitterPolicy,
    seed: u64,
) -> Result<Ensemble> {
    check(ensemble, forward_evals, r)?;
    let (_, _, _, cov_xh, cov_hh) = cross_moments(ensemble.params(), forward_evals)?;
    let bracket = &cov_hh + r;
    let iteration = ensemble.iteration();
    let moved = perturbed_move(
        ensemble.params(),
        forward_evals,
        observed,
        &cov_xh,
        &bracket,
        Some(r),
        jitter,
        seed,
        iteration,
    )
    .map_err(|e| e.at_iteration(iteration + 1))?;
    Ok(Ensemble::new(moved)?.with_iteration(iteration + 1))
}

/// Tempered ensemble Kalman inversion iterate with stepsize `h`:
/// `xᵢ ← xᵢ + C^{xH} (C^{HH} + h⁻¹R)⁻¹ (y − H(xᵢ) − ηᵢ)`, `ηᵢ ~ N(0, h⁻¹R)`.
pub fn gaussian_eki_step(
    ensemble: &Ensemble,
    forward_evals: &DMatrix<f64>,
    observed: &DVector<f64>,
    r: &DMatrix<f64>,
    h: f64,
    jitter: &JitterPolicy,
    seed: u64,
) -> Result<Ensemble> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("stepsize must be positive and finite, got {h}")));
    }
    check(ensemble, forward_evals, r)?;
    let (_, _, _, cov_xh, cov_hh) = cross_moments(ensemble.params(), forward_evals)?;
    let scaled = r * (1.0 / h);
    let bracket = &cov_hh + &scaled;
    let iteration = ensemble.iteration();
    let moved = perturbed_move(
        ensemble.params(),
        forward_evals,
        observed,
        &cov_xh,
        &bracket,
        Some(&scaled),
        jitter,
        seed,
        iteration,
    )
    .map_err(|e| e.at_iteration(iteration + 1))?;
    Ok(Ensemble::new(moved)?.with_iteration(iteration + 1))
}

/// Adaptive tempered EKI for additive Gaussian likelihoods, with pseudo-weights
/// `exp(−½ h (y − H(xᵢ))ᵀ R⁻¹ (y − H(xᵢ)))`. `sim_count` counts forward evaluations.
pub fn run_gaussian_eki(
    model: &dyn ForwardModel,
    observed: &DVector<f64>,
    config: &EkiConfig,
    seed: u64,
) -> Result<RunResult> {
    drive(model, Update::Gaussian(model), observed, config, seed)
}
