//! Adaptive inverse-temperature selection from pseudo-weights.

use nalgebra::{DMatrix, DVector};

use crate::ensemble::column;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, JitterPolicy};

/// Maximum number of bisection iterations.
const MAX_BISECTIONS: usize = 50;
/// The search runs over `log h ∈ [log h_max − LOG_SPAN, log h_max]`.
const LOG_SPAN: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    /// Normalized pseudo-weights at `lambda`.
    pub weights: Vec<f64>,
    pub ess: f64,
    /// `lambda_max` already met the ESS target; no search was run.
    pub clamped: bool,
    /// The ESS target could not be met within the search.
    pub flagged: bool,
}

/// Mahalanobis distances `(y − yᵢ)ᵀ C⁻¹ (y − yᵢ)` for every simulated column.
pub fn pseudo_weight_distances(
    sims: &DMatrix<f64>,
    observed: &DVector<f64>,
    cov: &DMatrix<f64>,
    jitter: &JitterPolicy,
) -> Result<Vec<f64>> {
    if sims.nrows() != observed.len() {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: sims.nrows(),
            got: observed.len(),
        });
    }
    let chol = cholesky_jittered(cov, jitter, "likelihood covariance estimate C^{y|x}")?.chol;
    let l = chol.l_dirty();
    Ok((0..sims.ncols())
        .map(|i| {
            let mut r = observed - DVector::from_column_slice(column(sims, i));
            // ‖L⁻¹ r‖² with L lower triangular
            if !l.solve_lower_triangular_mut(&mut r) {
                return f64::INFINITY;
            }
            r.norm_squared()
        })
        .collect())
}

fn log_weights(distances: &[f64], h: f64) -> Vec<f64> {
    distances
        .iter()
        .map(|&d| if d.is_finite() { -0.5 * h * d } else { f64::NEG_INFINITY })
        .collect()
}

/// Normalized weights and their ESS from log weights, with max-subtraction.
fn normalize(log_w: &[f64]) -> (Vec<f64>, f64) {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    let w: Vec<f64> = w.into_iter().map(|v| v / sum).collect();
    let ess = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    (w, ess)
}

/// Chooses the next temperature given precomputed distances.
///
/// Finds `λ ∈ (lambda_prev, lambda_max]` whose pseudo-weight ESS is within
/// `bisect_tol · N` of `rho · N`. The ESS is non-increasing in the stepsize, so
/// the root is bracketed by bisecting `log(λ − lambda_prev)`.
pub fn select_from_distances(
    distances: &[f64],
    lambda_prev: f64,
    lambda_max: f64,
    rho: f64,
    bisect_tol: f64,
) -> Result<LambdaSelection> {
    if !(lambda_prev < lambda_max) {
        return Err(Error::InvalidArgument(format!(
            "lambda_prev {lambda_prev} must be below lambda_max {lambda_max}"
        )));
    }
    if distances.is_empty() || distances.iter().all(|d| !d.is_finite()) {
        return Err(Error::NonFinite("pseudo-weight distances"));
    }
    let n = distances.len() as f64;
    let target = rho * n;
    let tol = bisect_tol * n;
    let ess_at = |h: f64| normalize(&log_weights(distances, h));

    let h_max = lambda_max - lambda_prev;
    let (w, ess) = ess_at(h_max);
    if ess >= target {
        return Ok(LambdaSelection {
            lambda: lambda_max,
            weights: w,
            ess,
            clamped: true,
            flagged: false,
        });
    }

    let mut lo = h_max.ln() - LOG_SPAN;
    let mut hi = h_max.ln();
    let (w_lo, ess_lo) = ess_at(lo.exp());
    if ess_lo < target - tol {
        // Weight collapse even for the smallest step: take it and flag.
        return Ok(LambdaSelection {
            lambda: lambda_prev + lo.exp(),
            weights: w_lo,
            ess: ess_lo,
            clamped: false,
            flagged: true,
        });
    }
    let mut best = (lo, w_lo, ess_lo);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let (w, ess) = ess_at(mid.exp());
        if (ess - target).abs() < (best.2 - target).abs() {
            best = (mid, w.clone(), ess);
        }
        if (ess - target).abs() <= tol {
            return Ok(LambdaSelection {
                lambda: lambda_prev + mid.exp(),
                weights: w,
                ess,
                clamped: false,
                flagged: false,
            });
        }
        if ess > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (log_h, w, ess) = best;
    Ok(LambdaSelection {
        lambda: lambda_prev + log_h.exp(),
        weights: w,
        ess,
        clamped: false,
        flagged: true,
    })
}

/// Chooses the next inverse temperature from the generalised pseudo-weights
/// `ŵᵢ ∝ exp(−½ (λ − λ_prev) (y − yᵢ)ᵀ (C^{y|x})⁻¹ (y − yᵢ))`.
#[allow(clippy::too_many_arguments)]
pub fn select_next_lambda(
    sims: &DMatrix<f64>,
    observed: &DVector<f64>,
    cov_y_given_x: &DMatrix<f64>,
    lambda_prev: f64,
    lambda_max: f64,
    rho: f64,
    bisect_tol: f64,
    jitter: &JitterPolicy,
) -> Result<LambdaSelection> {
    let d = pseudo_weight_distances(sims, observed, cov_y_given_x, jitter)?;
    select_from_distances(&d, lambda_prev, lambda_max, rho, bisect_tol)
}
