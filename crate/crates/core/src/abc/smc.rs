use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::abc::{distance, systematic_resample, weighted_moments};
use crate::eki::{RunResult, Schedule, Termination, ToleranceStep};
use crate::ensemble::{column, ess, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, JitterPolicy};
use crate::models::{sample_prior_matrix, simulate_matrix, SimulatorModel};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct AbcSmcConfig {
    pub n_particles: usize,
    /// Each tolerance keeps this fraction of the current effective sample size.
    pub ess_kappa_target: f64,
    /// Resample once the ESS falls below this fraction of `N`.
    pub resample_threshold: f64,
    /// Stop once the move acceptance rate falls below this value.
    pub stop_acceptance: f64,
    /// Multiplier on the weighted particle covariance; `None` means `2.38² / d_x`.
    pub rw_scale: Option<f64>,
    /// Starting tolerance; `None` means just above the largest prior-predictive distance.
    pub initial_kappa: Option<f64>,
    pub max_iters: usize,
    pub jitter: JitterPolicy,
    pub keep_snapshots: bool,
}

impl Default for AbcSmcConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            ess_kappa_target: 0.9,
            resample_threshold: 0.5,
            stop_acceptance: 0.015,
            rw_scale: None,
            initial_kappa: None,
            max_iters: 1000,
            jitter: JitterPolicy::default(),
            keep_snapshots: false,
        }
    }
}

impl AbcSmcConfig {
    pub fn new(n_particles: usize) -> Self {
        Self {
            n_particles,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::TooFewParticles(self.n_particles));
        }
        let ordered = 0.0 < self.stop_acceptance
            && self.stop_acceptance < self.resample_threshold
            && self.resample_threshold < self.ess_kappa_target
            && self.ess_kappa_target < 1.0;
        if !ordered {
            return Err(Error::Config(format!(
                "need 0 < stop_acceptance ({}) < resample_threshold ({}) < ess_kappa_target ({}) < 1",
                self.stop_acceptance, self.resample_threshold, self.ess_kappa_target
            )));
        }
        if let Some(s) = self.rw_scale {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::Config(format!("rw_scale must be non-negative, got {s}")));
            }
        }
        if let Some(k) = self.initial_kappa {
            if !(k > 0.0) {
                return Err(Error::Config(format!("initial_kappa must be positive, got {k}")));
            }
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one tolerance selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct KappaSelection {
    pub kappa: f64,
    pub ess: f64,
    pub flagged: bool,
}

/// Picks the next tolerance below `prev_kappa` whose indicator-reweighted ESS
/// is closest to `target`.
///
/// Candidates are the distinct distances of live particles; tolerance `d`
/// keeps exactly the particles with distance strictly below `d`. If no smaller
/// tolerance keeps any weight the previous tolerance is returned, flagged.
pub(crate) fn select_kappa(distances: &[f64], weights: &[f64], prev_kappa: f64, target: f64) -> KappaSelection {
    let mut live: Vec<(f64, f64)> = distances
        .iter()
        .zip(weights)
        .filter(|(d, w)| **w > 0.0 && **d < prev_kappa)
        .map(|(d, w)| (*d, *w))
        .collect();
    live.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = live.iter().map(|p| p.1).sum();
    let total_sq: f64 = live.iter().map(|p| p.1 * p.1).sum();
    let keep = KappaSelection {
        kappa: prev_kappa,
        ess: if total_sq > 0.0 { total * total / total_sq } else { 0.0 },
        flagged: true,
    };

    // Walk from the smallest tolerance upward; a candidate at index j keeps live[..j].
    let mut best: Option<KappaSelection> = None;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut j = 0;
    while j < live.len() {
        let d = live[j].0;
        if sum > 0.0 {
            let e = sum * sum / sum_sq;
            let better = best.is_none_or(|b| (e - target).abs() < (b.ess - target).abs());
            if better {
                best = Some(KappaSelection {
                    kappa: d,
                    ess: e,
                    flagged: false,
                });
            }
        }
        while j < live.len() && live[j].0 == d {
            sum += live[j].1;
            sum_sq += live[j].1 * live[j].1;
            j += 1;
        }
    }
    best.unwrap_or(keep)
}

/// Runs ABC-SMC with adaptive tolerances and one random-walk Metropolis–Hastings
/// rejuvenation move per live particle per iteration.
///
/// Every model simulation is counted in `sim_count`: `N` prior-predictive draws
/// plus one per proposed move. The returned ensemble is resampled to equal
/// weights.
pub fn run_abc_smc(
    model: &dyn SimulatorModel,
    observed: &DVector<f64>,
    config: &AbcSmcConfig,
    seed: u64,
) -> Result<RunResult> {
    config.validate()?;
    let dy = model.dim_y();
    if observed.len() != dy {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: dy,
            got: observed.len(),
        });
    }
    let n = config.n_particles;
    let dx = model.dim_x();
    let y_obs = observed.as_slice();
    let rw_scale = config.rw_scale.unwrap_or(2.38 * 2.38 / dx as f64);

    let mut params = sample_prior_matrix(model, n, seed);
    let mut sims = simulate_matrix(model, &params, seed, 0)?;
    let mut sim_count = n as u64;
    let mut dist: Vec<f64> = (0..n).map(|i| distance(y_obs, column(&sims, i))).collect();
    if dist.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("prior-predictive distances"));
    }
    let mut kappa = config
        .initial_kappa
        .unwrap_or_else(|| dist.iter().cloned().fold(0.0, f64::max) * (1.0 + 1e-9) + f64::MIN_POSITIVE);
    let mut weights: Vec<f64> = dist.iter().map(|&d| if d < kappa { 1.0 } else { 0.0 }).collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "initial tolerance {kappa} accepts no prior-predictive draw"
        )));
    }

    let mut steps = Vec::new();
    let mut snapshots = Vec::new();
    if config.keep_snapshots {
        snapshots.push(Ensemble::new(params.clone())?);
    }
    let mut termination = Termination::MaxIters;
    let (mut total_accepted, mut total_proposed) = (0u64, 0u64);

    for iteration in 1..=config.max_iters {
        let at = |e: Error| e.at_iteration(iteration);
        let prev_ess = ess(&weights).map_err(at)?;
        let sel = select_kappa(&dist, &weights, kappa, config.ess_kappa_target * prev_ess);
        kappa = sel.kappa;
        for (w, d) in weights.iter_mut().zip(&dist) {
            if *d >= kappa {
                *w = 0.0;
            }
        }
        let step_ess = ess(&weights).map_err(at)?;

        if step_ess < config.resample_threshold * n as f64 {
            let mut rng = substream(seed, Stream::Resample, &[iteration as u64]);
            let idx = systematic_resample(&weights, rng.random::<f64>());
            params = DMatrix::from_fn(dx, n, |r, c| params[(r, idx[c])]);
            sims = DMatrix::from_fn(dy, n, |r, c| sims[(r, idx[c])]);
            dist = idx.iter().map(|&i| dist[i]).collect();
            weights = vec![1.0; n];
        }

        let (_, cov) = weighted_moments(&params, &weights);
        let chol = if rw_scale == 0.0 || cov.iter().all(|&v| v == 0.0) {
            None
        } else {
            Some(cholesky_jittered(&(cov * rw_scale), &config.jitter, "ABC-SMC proposal covariance").map_err(at)?.chol.l())
        };

        let live: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
        let move_one = |i: usize| -> Result<Option<(Vec<f64>, Vec<f64>, f64)>> {
            let x = column(&params, i);
            let mut prop = x.to_vec();
            if let Some(l) = &chol {
                let mut rng = substream(seed, Stream::Proposal, &[iteration as u64, i as u64]);
                let z = DVector::from_fn(dx, |_, _| StandardNormal.sample(&mut rng));
                for (p, s) in prop.iter_mut().zip((l * z).iter()) {
                    *p += s;
                }
            }
            let mut sim_rng = substream(seed, Stream::Simulate, &[iteration as u64, i as u64]);
            let y = model.simulate(&prop, &mut sim_rng)?;
            if y.len() != dy {
                return Err(Error::DimensionMismatch {
                    what: "simulated data",
                    expected: dy,
                    got: y.len(),
                });
            }
            let d = distance(y_obs, &y);
            if !(d < kappa) {
                return Ok(None);
            }
            let log_ratio = model.log_prior(&prop) - model.log_prior(x);
            let u: f64 = substream(seed, Stream::Accept, &[iteration as u64, i as u64]).random();
            if log_ratio >= 0.0 || u.ln() < log_ratio {
                Ok(Some((prop, y, d)))
            } else {
                Ok(None)
            }
        };
        let moves: Vec<Option<(Vec<f64>, Vec<f64>, f64)>> = if model.parallel_safe() {
            live.par_iter().map(|&i| move_one(i)).collect::<Result<_>>()
        } else {
            live.iter().map(|&i| move_one(i)).collect::<Result<_>>()
        }
        .map_err(at)?;
        sim_count += live.len() as u64;

        let mut accepted = 0u64;
        for (&i, m) in live.iter().zip(moves) {
            if let Some((x, y, d)) = m {
                params.column_mut(i).copy_from_slice(&x);
                sims.column_mut(i).copy_from_slice(&y);
                dist[i] = d;
                accepted += 1;
            }
        }
        total_accepted += accepted;
        total_proposed += live.len() as u64;
        let rate = accepted as f64 / live.len() as f64;
        steps.push(ToleranceStep {
            iteration,
            kappa,
            ess: step_ess,
            acceptance_rate: rate,
            flagged: sel.flagged,
        });
        if config.keep_snapshots {
            snapshots.push(Ensemble::new(resampled(&params, &weights, seed, iteration))?);
        }
        if rate < config.stop_acceptance {
            termination = Termination::Acceptance;
            break;
        }
    }

    let final_iter = steps.len() + 1;
    let ensemble = Ensemble::new(resampled(&params, &weights, seed, final_iter))?.with_iteration(steps.len());
    Ok(RunResult {
        ensemble,
        schedule: Schedule::Tolerance(steps),
        sim_count,
        snapshots,
        termination,
        acceptance_rate: Some(if total_proposed > 0 {
            total_accepted as f64 / total_proposed as f64
        } else {
            0.0
        }),
    })
}

fn resampled(params: &DMatrix<f64>, weights: &[f64], seed: u64, tag: usize) -> DMatrix<f64> {
    if weights.iter().all(|&w| w == weights[0]) {
        return params.clone();
    }
    let mut rng = substream(seed, Stream::Resample, &[u64::MAX, tag as u64]);
    let idx = systematic_resample(weights, rng.random::<f64>());
    DMatrix::from_fn(params.nrows(), params.ncols(), |r, c| params[(r, idx[c])])
}
