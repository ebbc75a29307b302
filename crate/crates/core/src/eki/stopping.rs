//! Stopping predicates.

use nalgebra::{DMatrix, DVector};

use crate::eki::TemperSchedule;
use crate::linalg::{cholesky_jittered, JitterPolicy};

/// True once the last realized temperature has reached `lambda_max`.
pub fn stop_sampling(schedule: &TemperSchedule, lambda_max: f64) -> bool {
    schedule.final_lambda() >= lambda_max
}

/// True iff `[C^xx_ℓ]_kk < υ [C^xx_0]_kk` for every coordinate `k`.
pub fn stop_optimisation(initial_cov_xx: &DMatrix<f64>, current_cov_xx: &DMatrix<f64>, upsilon: f64) -> bool {
    let d = initial_cov_xx.nrows().min(current_cov_xx.nrows());
    (0..d).all(|k| current_cov_xx[(k, k)] < upsilon * initial_cov_xx[(k, k)])
}

/// True iff `(y − ȳ)ᵀ R⁻¹ (y − ȳ) < tau`. A non-factorizable `R` never stops.
pub fn stop_discrepancy(mean_sims: &DVector<f64>, observed: &DVector<f64>, noise_cov: &DMatrix<f64>, tau: f64) -> bool {
    let Ok(f) = cholesky_jittered(noise_cov, &JitterPolicy::none(), "discrepancy noise covariance") else {
        return false;
    };
    let r = observed - mean_sims;
    let misfit = r.dot(&f.chol.solve(&r));
    misfit < tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eki::TemperStep;

    fn schedule(lambdas: &[f64]) -> TemperSchedule {
        let mut prev = 0.0;
        TemperSchedule {
            steps: lambdas
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    let s = TemperStep {
                        iteration: i + 1,
                        lambda: l,
                        h: l - prev,
                        ess: 1.0,
                        clamped: false,
                        flagged: false,
                    };
                    prev = l;
                    s
                })
                .collect(),
        }
    }

    #[test]
    fn sampling_boundary() {
        assert!(stop_sampling(&schedule(&[0.4, 1.0]), 1.0));
        assert!(!stop_sampling(&schedule(&[0.4, 0.9]), 1.0));
        assert!(!stop_sampling(&TemperSchedule::default(), 1.0));
    }

    #[test]
    fn optimisation_needs_strict_inequality_everywhere() {
        let init = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let exact = DMatrix::from_diagonal(&DVector::from_vec(vec![0.001, 0.04]));
        assert!(!stop_optimisation(&init, &exact, 1e-2));
        let below = DMatrix::from_diagonal(&DVector::from_vec(vec![0.001, 0.039]));
        assert!(stop_optimisation(&init, &below, 1e-2));
    }

    #[test]
    fn zero_residual_discrepancy() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let r = DMatrix::identity(2, 2);
        assert!(stop_discrepancy(&y, &y, &r, 1e-12));
        assert!(!stop_discrepancy(&DVector::zeros(2), &y, &r, 5.0));
        assert!(stop_discrepancy(&DVector::zeros(2), &y, &r, 5.000_001));
    }
}
