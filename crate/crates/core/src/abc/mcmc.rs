use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::abc::{distance, RunningCovariance};
use crate::eki::{RunResult, Schedule, Termination, ToleranceStep};
use crate::ensemble::{column, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, JitterPolicy};
use crate::models::{sample_prior_matrix, SimulatorModel};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct AbcMcmcConfig {
    /// Chain length; also the number of simulations spent.
    pub n_steps: usize,
    pub target_acceptance: f64,
    /// Robbins–Monro gain `t^(−gain_exponent)`.
    pub gain_exponent: f64,
    /// Starting tolerance; `None` uses the `target_acceptance` quantile of the
    /// simulated pilot distances.
    pub initial_kappa: Option<f64>,
    /// Multiplier on `2.38² / d_x · Σ̂`. Zero freezes the chain.
    pub proposal_scale: f64,
    /// Steps before the chain covariance replaces the prior covariance.
    pub adapt_start: usize,
    /// Prior draws used for the initial proposal covariance. Up to a tenth of
    /// `n_steps` of them are also simulated to pick the starting state.
    pub pilot_draws: usize,
    /// Leading fraction of the chain discarded before thinning.
    pub burn_in: f64,
    /// Number of states returned; `None` keeps every post-burn-in state.
    pub n_keep: Option<usize>,
    pub jitter: JitterPolicy,
}

impl Default for AbcMcmcConfig {
    fn default() -> Self {
        Self {
            n_steps: 20_000,
            target_acceptance: 0.10,
            gain_exponent: 0.6,
            initial_kappa: None,
            proposal_scale: 1.0,
            adapt_start: 100,
            pilot_draws: 200,
            burn_in: 0.5,
            n_keep: None,
            jitter: JitterPolicy::default(),
        }
    }
}

impl AbcMcmcConfig {
    pub fn new(n_steps: usize) -> Self {
        Self {
            n_steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::Config(format!("n_steps must be at least 2, got {}", self.n_steps)));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config(format!(
                "target_acceptance must be in (0, 1), got {}",
                self.target_acceptance
            )));
        }
        if !(self.gain_exponent > 0.5 && self.gain_exponent <= 1.0) {
            return Err(Error::Config(format!(
                "gain_exponent must be in (0.5, 1], got {}",
                self.gain_exponent
            )));
        }
        if !(self.proposal_scale >= 0.0) || !self.proposal_scale.is_finite() {
            return Err(Error::Config("proposal_scale must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::Config(format!("burn_in must be in [0, 1), got {}", self.burn_in)));
        }
        if self.pilot_draws < 2 {
            return Err(Error::Config("pilot_draws must be at least 2".into()));
        }
        if let Some(k) = self.initial_kappa {
            if !(k > 0.0) {
                return Err(Error::Config(format!("initial_kappa must be positive, got {k}")));
            }
        }
        if self.n_keep == Some(0) {
            return Err(Error::Config("n_keep must be positive".into()));
        }
        Ok(())
    }
}

/// Runs single-chain adaptive ABC-MCMC.
///
/// The proposal is a Gaussian random walk with covariance
/// `proposal_scale · 2.38² / d_x · Σ̂`, where `Σ̂` is the running covariance of
/// the chain (the prior covariance during the first `adapt_start` steps). The
/// tolerance follows `log κ ← log κ − t^(−a) (α_t − target)` where `α_t` is the
/// acceptance probability of step `t`. The chain starts from the closest of
/// the simulated pilot draws. Every pilot draw and chain step simulates once,
/// `n_steps` in total.
pub fn run_abc_mcmc(
    model: &dyn SimulatorModel,
    observed: &DVector<f64>,
    config: &AbcMcmcConfig,
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
    let dx = model.dim_x();
    let y_obs = observed.as_slice();
    let scale = config.proposal_scale * 2.38 * 2.38 / dx as f64;

    let pilot = Ensemble::new(sample_prior_matrix(model, config.pilot_draws, seed))?;
    let pilot_cov = pilot.cov();
    let simulate = |x: &[f64], t: usize| -> Result<Vec<f64>> {
        let y = model.simulate(x, &mut substream(seed, Stream::Simulate, &[t as u64]))?;
        if y.len() != dy {
            return Err(Error::DimensionMismatch {
                what: "simulated data",
                expected: dy,
                got: y.len(),
            });
        }
        Ok(y)
    };

    let n_pilot = config.pilot_draws.min(config.n_steps / 10).max(1);
    let mut pilot_d = Vec::with_capacity(n_pilot);
    for t in 0..n_pilot {
        let d = distance(y_obs, &simulate(&column(pilot.params(), t).to_vec(), t)?);
        pilot_d.push(if d.is_nan() { f64::INFINITY } else { d });
    }
    let best = (0..n_pilot).min_by(|&a, &b| pilot_d[a].total_cmp(&pilot_d[b])).unwrap_or(0);
    if !pilot_d[best].is_finite() {
        return Err(Error::NonFinite("pilot distances"));
    }
    let mut x = column(pilot.params(), best).to_vec();
    let kappa0 = config.initial_kappa.unwrap_or_else(|| {
        let mut sorted = pilot_d.clone();
        sorted.sort_by(f64::total_cmp);
        let q = sorted[((config.target_acceptance * n_pilot as f64) as usize).min(n_pilot - 1)];
        let q = if q.is_finite() { q } else { pilot_d[best] };
        q * (1.0 + 1e-9) + f64::MIN_POSITIVE
    });
    let mut log_kappa = kappa0.ln();
    let mut log_prior_x = model.log_prior(&x);

    let mut running = RunningCovariance::new(dx);
    running.push(&x);
    let mut chain: Vec<Vec<f64>> = Vec::with_capacity(config.n_steps - n_pilot + 1);
    chain.push(x.clone());
    let mut steps = Vec::new();
    let log_every = (config.n_steps / 100).max(1);
    let burn = n_pilot + (((config.n_steps - n_pilot) as f64) * config.burn_in) as usize;
    let (mut window_acc, mut window_len) = (0usize, 0usize);
    let (mut kept_acc, mut kept_len) = (0usize, 0usize);
    let mut factor: Option<DMatrix<f64>> = None;

    for t in n_pilot..config.n_steps {
        let at = |e: Error| e.at_iteration(t);
        let step = t - n_pilot + 1;
        let adapted = step >= config.adapt_start;
        if scale > 0.0 && (factor.is_none() || adapted) {
            let sigma = if adapted { running.covariance() } else { pilot_cov.clone() };
            factor = if sigma.iter().all(|&v| v == 0.0) {
                None
            } else {
                Some(
                    cholesky_jittered(&(sigma * scale), &config.jitter, "ABC-MCMC proposal covariance")
                        .map_err(at)?
                        .chol
                        .l(),
                )
            };
        }
        let mut prop = x.clone();
        if let Some(l) = &factor {
            let mut rng = substream(seed, Stream::Proposal, &[t as u64]);
            let z = DVector::from_fn(dx, |_, _| StandardNormal.sample(&mut rng));
            for (p, s) in prop.iter_mut().zip((l * z).iter()) {
                *p += s;
            }
        }
        let y = simulate(&prop, t).map_err(at)?;
        let hit = distance(y_obs, &y) < log_kappa.exp();
        let log_prior_prop = model.log_prior(&prop);
        let alpha = if hit {
            (log_prior_prop - log_prior_x).min(0.0).exp()
        } else {
            0.0
        };
        let u: f64 = substream(seed, Stream::Accept, &[t as u64]).random();
        let accepted = hit && u < alpha;
        if accepted {
            x = prop;
            log_prior_x = log_prior_prop;
        }
        let gain = (step as f64).powf(-config.gain_exponent);
        log_kappa -= gain * (alpha - config.target_acceptance);

        running.push(&x);
        chain.push(x.clone());
        window_acc += accepted as usize;
        window_len += 1;
        if t >= burn {
            kept_acc += accepted as usize;
            kept_len += 1;
        }
        if t % log_every == 0 || t + 1 == config.n_steps {
            steps.push(ToleranceStep {
                iteration: t,
                kappa: log_kappa.exp(),
                ess: f64::NAN,
                acceptance_rate: window_acc as f64 / window_len as f64,
                flagged: false,
            });
            window_acc = 0;
            window_len = 0;
        }
    }

    let tail = &chain[(burn - n_pilot).min(chain.len() - 1)..];
    let keep = config.n_keep.unwrap_or(tail.len()).min(tail.len());
    let picked: Vec<Vec<f64>> = (0..keep).map(|j| tail[j * tail.len() / keep].clone()).collect();
    let ensemble = Ensemble::from_rows(&picked)?.with_iteration(config.n_steps);
    Ok(RunResult {
        ensemble,
        schedule: Schedule::Tolerance(steps),
        sim_count: config.n_steps as u64,
        snapshots: Vec::new(),
        termination: Termination::ChainComplete,
        acceptance_rate: Some(if kept_len > 0 { kept_acc as f64 / kept_len as f64 } else { 0.0 }),
    })
}
