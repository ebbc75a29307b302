//! Ensemble Kalman inversion for general likelihoods.
//!
//! Each iteration simulates data for every particle, forms the empirical
//! moments, picks the next inverse temperature from the pseudo-weight ESS and
//! moves the particles with a perturbed-observation Kalman update whose noise
//! covariance is estimated from the ensemble itself. The additive-Gaussian
//! iterate in [`gaussian`] is kept as a reference for the linear case.

mod driver;
pub mod gaussian;
mod step;
pub mod stopping;
mod tempering;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, JitterPolicy};

pub use driver::run_eki;
pub use gaussian::{enkf_update, gaussian_eki_step, run_gaussian_eki, ForwardModel};
pub use step::eki_step;
pub use stopping::{stop_discrepancy, stop_optimisation, stop_sampling};
pub use tempering::{pseudo_weight_distances, select_from_distances, select_next_lambda, LambdaSelection};

/// One realized tempering step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperStep {
    pub iteration: usize,
    pub lambda: f64,
    pub h: f64,
    /// ESS of the pseudo-weights at the selected temperature.
    pub ess: f64,
    /// The ESS search was skipped because the upper bound already met the target.
    #[serde(skip)]
    pub clamped: bool,
    /// The search could not reach the ESS target.
    #[serde(skip)]
    pub flagged: bool,
}

/// The realized inverse-temperature sequence `0 = λ₀ < λ₁ < …`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemperSchedule {
    pub steps: Vec<TemperStep>,
}

impl TemperSchedule {
    /// `λ₀ = 0` followed by every realized temperature.
    pub fn lambdas(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.steps.iter().map(|s| s.lambda)).collect()
    }

    pub fn final_lambda(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.lambda)
    }

    pub fn stepsizes(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.h).collect()
    }
}

/// One ABC tolerance level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceStep {
    pub iteration: usize,
    pub kappa: f64,
    pub ess: f64,
    pub acceptance_rate: f64,
    #[serde(skip)]
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Temper(TemperSchedule),
    Tolerance(Vec<ToleranceStep>),
}

impl Schedule {
    /// Final inverse temperature (EKI) or tolerance (ABC).
    pub fn final_value(&self) -> f64 {
        match self {
            Schedule::Temper(t) => t.final_lambda(),
            Schedule::Tolerance(t) => t.last().map_or(f64::NAN, |s| s.kappa),
        }
    }

    pub fn as_temper(&self) -> Option<&TemperSchedule> {
        match self {
            Schedule::Temper(t) => Some(t),
            Schedule::Tolerance(_) => None,
        }
    }

    pub fn as_tolerance(&self) -> Option<&[ToleranceStep]> {
        match self {
            Schedule::Temper(_) => None,
            Schedule::Tolerance(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Sampling,
    Optimisation,
    Discrepancy,
    MaxIters,
    /// ABC-SMC: the Metropolis–Hastings acceptance rate fell below its threshold.
    Acceptance,
    /// ABC-MCMC: the chain ran its full length.
    ChainComplete,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Sampling => "sampling",
            Termination::Optimisation => "optimisation",
            Termination::Discrepancy => "discrepancy",
            Termination::MaxIters => "max_iters",
            Termination::Acceptance => "acceptance",
            Termination::ChainComplete => "chain_complete",
        }
    }
}

/// Output of any of the inference algorithms.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub ensemble: Ensemble,
    pub schedule: Schedule,
    /// Number of likelihood simulations (or forward evaluations) consumed.
    pub sim_count: u64,
    /// Ensembles after each iteration, starting with the prior, when requested.
    pub snapshots: Vec<Ensemble>,
    pub termination: Termination,
    /// Overall Metropolis–Hastings acceptance rate (ABC only).
    pub acceptance_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum StopMode {
    /// Stop once the inverse temperature reaches `lambda_max`.
    #[default]
    Sampling,
    /// Stop once every marginal variance is below `upsilon` times its initial value.
    Optimisation,
    /// Stop once `(y − ȳ)ᵀ R⁻¹ (y − ȳ) < tau` for a user-supplied `R`.
    Discrepancy { tau: f64, noise_cov: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkiConfig {
    pub n_particles: usize,
    /// Target ESS fraction for the pseudo-weights.
    pub rho: f64,
    /// Variance fraction for the optimisation stop.
    pub upsilon: f64,
    /// Terminal inverse temperature in sampling mode.
    pub lambda_max: f64,
    pub max_iters: usize,
    pub stop_mode: StopMode,
    /// ESS tolerance of the temperature search, as a fraction of `N`.
    pub bisect_tol: f64,
    pub jitter: JitterPolicy,
    pub keep_snapshots: bool,
}

impl Default for EkiConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            rho: 0.5,
            upsilon: 1e-2,
            lambda_max: 1.0,
            max_iters: 500,
            stop_mode: StopMode::Sampling,
            bisect_tol: 1e-2,
            jitter: JitterPolicy::default(),
            keep_snapshots: false,
        }
    }
}

impl EkiConfig {
    pub fn sampling(n_particles: usize) -> Self {
        Self {
            n_particles,
            ..Self::default()
        }
    }

    pub fn optimisation(n_particles: usize) -> Self {
        Self {
            n_particles,
            stop_mode: StopMode::Optimisation,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::TooFewParticles(self.n_particles));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must be in (0, 1), got {}", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.upsilon) {
            return Err(Error::Config(format!("upsilon must be in [0, 1], got {}", self.upsilon)));
        }
        if !(self.lambda_max > 0.0) {
            return Err(Error::Config(format!("lambda_max must be positive, got {}", self.lambda_max)));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.bisect_tol > 0.0) {
            return Err(Error::Config("bisect_tol must be positive".into()));
        }
        if let StopMode::Discrepancy { tau, noise_cov } = &self.stop_mode {
            if !(*tau > 0.0) {
                return Err(Error::Config("discrepancy tau must be positive".into()));
            }
            cholesky_jittered(noise_cov, &JitterPolicy::none(), "discrepancy noise covariance")?;
        }
        Ok(())
    }
}
