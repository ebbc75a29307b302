//! Stochastic Lorenz 96 with partial noisy observations.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::normal;
use crate::models::SimulatorModel;

/// Drift `−x[m−2] x[m−1] + x[m−1] x[m+1] − x[m] + F` with cyclic indexing.
pub fn l96_drift(x: &[f64], forcing: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    l96_drift_into(x, forcing, &mut out);
    out
}

fn l96_drift_into(x: &[f64], forcing: f64, out: &mut [f64]) {
    let d = x.len();
    for m in 0..d {
        let xm2 = x[(m + d - 2) % d];
        let xm1 = x[(m + d - 1) % d];
        let xp1 = x[(m + 1) % d];
        out[m] = -xm2 * xm1 + xm1 * xp1 - x[m] + forcing;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L96Config {
    pub d_x: usize,
    pub forcing: f64,
    pub dt: f64,
    pub obs_times: Vec<f64>,
    pub obs_noise_var: f64,
    /// 0-based indices of observed coordinates.
    pub observed_dims: Vec<usize>,
    /// Multiplier on the Brownian increment; 1 for the standard model.
    pub diffusion: f64,
    /// Prior `N(F·1, prior_var·I)` on the initial condition.
    pub prior_var: f64,
}

impl Default for L96Config {
    fn default() -> Self {
        Self::with_dim(40)
    }
}

impl L96Config {
    /// Standard setup for `d_x` coordinates, observing every other one
    /// (1-based odd coordinates) at t = 1..5.
    pub fn with_dim(d_x: usize) -> Self {
        Self {
            d_x,
            forcing: 8.0,
            dt: 0.001,
            obs_times: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            obs_noise_var: 0.1,
            observed_dims: (0..d_x).step_by(2).collect(),
            diffusion: 1.0,
            prior_var: 5.0,
        }
    }

    pub fn d_y(&self) -> usize {
        self.obs_times.len() * self.observed_dims.len()
    }

    /// Step indices at which observations are taken.
    pub fn obs_steps(&self) -> Result<Vec<usize>> {
        self.obs_times
            .iter()
            .map(|&t| {
                let steps = t / self.dt;
                let rounded = steps.round();
                if (steps - rounded).abs() > 1e-6 * steps.max(1.0) {
                    Err(Error::Config(format!(
                        "observation time {t} is not on the dt = {} grid",
                        self.dt
                    )))
                } else {
                    Ok(rounded as usize)
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_x < 4 {
            return Err(Error::Config(format!("Lorenz 96 needs d_x >= 4, got {}", self.d_x)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.obs_times.is_empty()
            || self.obs_times[0] <= 0.0
            || self.obs_times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(
                "obs_times must be positive and strictly increasing".into(),
            ));
        }
        if self.observed_dims.is_empty() || self.observed_dims.iter().any(|&m| m >= self.d_x) {
            return Err(Error::Config("observed_dims must be non-empty indices below d_x".into()));
        }
        if !(self.obs_noise_var >= 0.0) || !(self.prior_var > 0.0) || !(self.diffusion >= 0.0) {
            return Err(Error::Config("variances must be non-negative (prior_var positive)".into()));
        }
        self.obs_steps().map(|_| ())
    }
}

/// Integrates from `x0` with Euler–Maruyama and returns the noisy observations,
/// time-major (all observed coordinates at the first time, then the next time, ...).
pub fn l96_simulate(x0: &[f64], config: &L96Config, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    if x0.len() != config.d_x {
        return Err(Error::DimensionMismatch {
            what: "Lorenz 96 initial condition",
            expected: config.d_x,
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Lorenz 96 initial condition"));
    }
    let obs_steps = config.obs_steps()?;
    let noise_sd = config.dt.sqrt() * config.diffusion;
    let obs_sd = config.obs_noise_var.sqrt();
    let mut x = x0.to_vec();
    let mut drift = vec![0.0; config.d_x];
    let mut out = Vec::with_capacity(config.d_y());
    let mut step = 0;
    for &target in &obs_steps {
        while step < target {
            l96_drift_into(&x, config.forcing, &mut drift);
            for (xi, fi) in x.iter_mut().zip(&drift) {
                *xi += fi * config.dt;
                if noise_sd > 0.0 {
                    let xi_noise: f64 = rng.sample(StandardNormal);
                    *xi += noise_sd * xi_noise;
                }
            }
            step += 1;
            if step % 100 == 0 && x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Simulation(format!(
                    "Lorenz 96 state diverged by t = {}",
                    step as f64 * config.dt
                )));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation(format!(
                "Lorenz 96 state diverged by t = {}",
                step as f64 * config.dt
            )));
        }
        for &m in &config.observed_dims {
            let e: f64 = rng.sample(StandardNormal);
            out.push(x[m] + obs_sd * e);
        }
    }
    Ok(out)
}

/// Initial-condition inference for stochastic Lorenz 96.
#[derive(Debug, Clone)]
pub struct L96Model {
    pub config: L96Config,
}

impl L96Model {
    pub fn new(config: L96Config) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl SimulatorModel for L96Model {
    fn name(&self) -> &str {
        "l96"
    }

    fn dim_x(&self) -> usize {
        self.config.d_x
    }

    fn dim_y(&self) -> usize {
        self.config.d_y()
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let sd = self.config.prior_var.sqrt();
        (0..self.config.d_x)
            .map(|_| self.config.forcing + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn log_prior(&self, x: &[f64]) -> f64 {
        let sd = self.config.prior_var.sqrt();
        x.iter()
            .map(|&v| normal::ln_pdf((v - self.config.forcing) / sd))
            .sum()
    }

    fn simulate(&self, x: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        l96_simulate(x, &self.config, rng)
    }
}
