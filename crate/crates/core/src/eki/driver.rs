use nalgebra::DVector;

use crate::eki::gaussian::{forward_matrix, gaussian_eki_step, ForwardModel};
use crate::eki::stopping::{stop_discrepancy, stop_optimisation, stop_sampling};
use crate::eki::tempering::select_next_lambda;
use crate::eki::{eki_step, EkiConfig, RunResult, Schedule, StopMode, TemperSchedule, TemperStep, Termination};
use crate::ensemble::{compute_moments, Ensemble};
use crate::error::{Error, Result};
use crate::models::{sample_prior_matrix, simulate_matrix, SimulatorModel};

pub(crate) enum Update<'a> {
    /// Simulated data, gain and noise from the ensemble's own moments.
    General,
    /// Known forward map and noise covariance.
    Gaussian(&'a dyn ForwardModel),
}

/// Runs ensemble Kalman inversion for a simulator-only likelihood.
///
/// Each iteration spends `N` likelihood simulations. In sampling mode the last
/// temperature is exactly `config.lambda_max`. Optimisation and discrepancy
/// modes search each step up to `10 λ_prev + 1`. Hitting `max_iters` is
/// reported through [`Termination::MaxIters`], not as an error.
pub fn run_eki(
    model: &dyn SimulatorModel,
    observed: &DVector<f64>,
    config: &EkiConfig,
    seed: u64,
) -> Result<RunResult> {
    drive(model, Update::General, observed, config, seed)
}

pub(crate) fn drive(
    model: &dyn SimulatorModel,
    update: Update<'_>,
    observed: &DVector<f64>,
    config: &EkiConfig,
    seed: u64,
) -> Result<RunResult> {
    config.validate()?;
    if observed.len() != model.dim_y() {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: model.dim_y(),
            got: observed.len(),
        });
    }
    let n = config.n_particles;
    let mut ensemble = Ensemble::new(sample_prior_matrix(model, n, seed))?;
    let initial_cov = ensemble.cov();
    let mut schedule = TemperSchedule::default();
    let mut snapshots = Vec::new();
    if config.keep_snapshots {
        snapshots.push(ensemble.clone());
    }
    let mut lambda = 0.0;
    let mut sim_count = 0u64;
    let mut termination = Termination::MaxIters;

    for round in 0..config.max_iters {
        let iteration = round + 1;
        let predicted = match update {
            Update::General => simulate_matrix(model, ensemble.params(), seed, round as u64),
            Update::Gaussian(fm) => Ok(forward_matrix(fm, ensemble.params())),
        }
        .map_err(|e| e.at_iteration(iteration))?;
        sim_count += n as u64;
        let current = ensemble.with_sims(predicted).map_err(|e| e.at_iteration(iteration))?;
        let sims = current.sims().expect("just attached");

        if let StopMode::Discrepancy { tau, noise_cov } = &config.stop_mode {
            let ncols = sims.ncols() as f64;
            let mean_y = DVector::from_iterator(sims.nrows(), sims.row_iter().map(|r| r.sum() / ncols));
            if stop_discrepancy(&mean_y, observed, noise_cov, *tau) {
                ensemble = current;
                termination = Termination::Discrepancy;
                break;
            }
        }

        let upper = match config.stop_mode {
            StopMode::Sampling => config.lambda_max,
            _ => lambda * 10.0 + 1.0,
        };
        let (moved, selection) = match update {
            Update::General => {
                let moments = compute_moments(&current, &config.jitter).map_err(|e| e.at_iteration(iteration))?;
                let sel = select_next_lambda(
                    sims,
                    observed,
                    &moments.cov_y_given_x,
                    lambda,
                    upper,
                    config.rho,
                    config.bisect_tol,
                    &config.jitter,
                )
                .map_err(|e| e.at_iteration(iteration))?;
                let h = sel.lambda - lambda;
                (eki_step(&current, observed, h, &moments, &config.jitter, seed)?, sel)
            }
            Update::Gaussian(fm) => {
                let r = fm.noise_cov();
                let sel = select_next_lambda(
                    sims,
                    observed,
                    &r,
                    lambda,
                    upper,
                    config.rho,
                    config.bisect_tol,
                    &config.jitter,
                )
                .map_err(|e| e.at_iteration(iteration))?;
                let h = sel.lambda - lambda;
                let moved = gaussian_eki_step(&current, sims, observed, &r, h, &config.jitter, seed)?;
                (moved, sel)
            }
        };
        schedule.steps.push(TemperStep {
            iteration,
            lambda: selection.lambda,
            h: selection.lambda - lambda,
            ess: selection.ess,
            clamped: selection.clamped,
            flagged: selection.flagged,
        });
        lambda = selection.lambda;
        ensemble = moved;
        if config.keep_snapshots {
            snapshots.push(ensemble.clone());
        }

        match config.stop_mode {
            StopMode::Sampling if stop_sampling(&schedule, config.lambda_max) => {
                termination = Termination::Sampling;
                break;
            }
            StopMode::Optimisation if stop_optimisation(&initial_cov, &ensemble.cov(), config.upsilon) => {
                termination = Termination::Optimisation;
                break;
            }
            _ => {}
        }
    }

    Ok(RunResult {
        ensemble,
        schedule: Schedule::Temper(schedule),
        sim_count,
        snapshots,
        termination,
        acceptance_rate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearGaussianModel;

    #[test]
    fn sampling_mode_lands_on_one() {
        let model = LinearGaussianModel::scalar();
        let y = DVector::from_element(1, 1.0);
        let res = run_eki(&model, &y, &EkiConfig::sampling(100_000), 1).unwrap();
        assert_eq!(res.termination, Termination::Sampling);
        let sched = res.schedule.as_temper().unwrap();
        assert_eq!(sched.final_lambda(), 1.0);
        assert!(sched.lambdas().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(res.sim_count, 100_000 * sched.steps.len() as u64);
        assert!((res.ensemble.mean()[0] - 0.5).abs() < 0.03);
        assert!((res.ensemble.cov()[(0, 0)] - 0.5).abs() < 0.03);
    }

    #[test]
    fn optimisation_mode_collapses() {
        let model = LinearGaussianModel::scalar();
        let y = DVector::from_element(1, 1.0);
        let res = run_eki(&model, &y, &EkiConfig::optimisation(2000), 2).unwrap();
        assert_eq!(res.termination, Termination::Optimisation);
        assert!(res.ensemble.cov()[(0, 0)] < 1e-2 * 1.0 * 1.1);
        assert!(res.schedule.final_value() > 1.0);
    }

    #[test]
    fn discrepancy_mode_stops() {
        let model = LinearGaussianModel::scalar();
        let y = DVector::from_element(1, 1.0);
        let cfg = EkiConfig {
            n_particles: 1000,
            stop_mode: StopMode::Discrepancy {
                tau: 0.05,
                noise_cov: model.r.clone(),
            },
            ..EkiConfig::default()
        };
        let res = run_eki(&model, &y, &cfg, 3).unwrap();
        assert_eq!(res.termination, Termination::Discrepancy);
    }

    #[test]
    fn max_iters_is_flagged_not_error() {
        let model = LinearGaussianModel::scalar();
        let y = DVector::from_element(1, 1.0);
        let cfg = EkiConfig {
            max_iters: 1,
            upsilon: 0.0,
            ..EkiConfig::optimisation(50)
        };
        let res = run_eki(&model, &y, &cfg, 4).unwrap();
        assert_eq!(res.termination, Termination::MaxIters);
        assert_eq!(res.sim_count, 50);
    }

    #[test]
    fn snapshots_recorded() {
        let model = LinearGaussianModel::scalar();
        let y = DVector::from_element(1, 1.0);
        let cfg = EkiConfig {
            keep_snapshots: true,
            ..EkiConfig::sampling(200)
        };
        let res = run_eki(&model, &y, &cfg, 5).unwrap();
        let steps = res.schedule.as_temper().unwrap().steps.len();
        assert_eq!(res.snapshots.len(), steps + 1);
        assert_eq!(res.snapshots.last().unwrap(), &res.ensemble);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = LinearGaussianModel::scalar();
        assert!(run_eki(&model, &DVector::zeros(2), &EkiConfig::sampling(10), 0).is_err());
    }
}
