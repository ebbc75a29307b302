use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abc::{AbcMcmcConfig, AbcSmcConfig};
use crate::eki::{EkiConfig, StopMode};
use crate::error::{Error, Result};
use crate::linalg::JitterPolicy;
use crate::models::{build_model, SimulatorModel};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "EKIGL_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "results";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    EkiSampling,
    EkiOptimisation,
    AbcSmc,
    AbcMcmc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::EkiSampling,
        Algorithm::EkiOptimisation,
        Algorithm::AbcSmc,
        Algorithm::AbcMcmc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::EkiSampling => "eki-sampling",
            Algorithm::EkiOptimisation => "eki-optimisation",
            Algorithm::AbcSmc => "abc-smc",
            Algorithm::AbcMcmc => "abc-mcmc",
        }
    }

    pub(crate) fn tag(&self) -> u64 {
        *self as u64
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EkiSection {
    pub rho: f64,
    pub upsilon: f64,
    pub lambda_max: f64,
    pub max_iters: usize,
    pub bisect_tol: f64,
    pub jitter: JitterPolicy,
}

impl Default for EkiSection {
    fn default() -> Self {
        let d = EkiConfig::default();
        Self {
            rho: d.rho,
            upsilon: d.upsilon,
            lambda_max: d.lambda_max,
            max_iters: d.max_iters,
            bisect_tol: d.bisect_tol,
            jitter: d.jitter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcSmcSection {
    pub ess_kappa_target: f64,
    pub resample_threshold: f64,
    pub stop_acceptance: f64,
    pub rw_scale: Option<f64>,
    pub initial_kappa: Option<f64>,
    pub max_iters: usize,
}

impl Default for AbcSmcSection {
    fn default() -> Self {
        let d = AbcSmcConfig::default();
        Self {
            ess_kappa_target: d.ess_kappa_target,
            resample_threshold: d.resample_threshold,
            stop_acceptance: d.stop_acceptance,
            rw_scale: d.rw_scale,
            initial_kappa: d.initial_kappa,
            max_iters: d.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcMcmcSection {
    /// Chain length is `N × steps_per_particle`.
    pub steps_per_particle: usize,
    pub target_acceptance: f64,
    pub gain_exponent: f64,
    pub initial_kappa: Option<f64>,
    pub adapt_start: usize,
    pub burn_in: f64,
}

impl Default for AbcMcmcSection {
    fn default() -> Self {
        let d = AbcMcmcConfig::default();
        Self {
            steps_per_particle: 40,
            target_acceptance: d.target_acceptance,
            gain_exponent: d.gain_exponent,
            initial_kappa: d.initial_kappa,
            adapt_start: d.adapt_start,
            burn_in: d.burn_in,
        }
    }
}

/// A batch experiment: one model, a sweep over algorithms × N × seeds.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    #[serde(default)]
    pub model_params: toml::Table,
    #[serde(alias = "algorithms")]
    pub algorithm: OneOrMany<Algorithm>,
    pub n: OneOrMany<usize>,
    pub seeds: Vec<u64>,
    /// Mixed into every per-seed stream.
    #[serde(default)]
    pub root_seed: u64,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub snapshots: bool,
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    #[serde(default)]
    pub eki: EkiSection,
    #[serde(default)]
    pub abc_smc: AbcSmcSection,
    #[serde(default)]
    pub abc_mcmc: AbcMcmcSection,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn algorithms(&self) -> Vec<Algorithm> {
        self.algorithm.to_vec()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.n.to_vec()
    }

    /// Checks everything that can be checked before simulating, including
    /// that the model can be built.
    pub fn validate(&self) -> Result<Box<dyn SimulatorModel>> {
        if self.algorithms().is_empty() {
            return Err(Error::Config("`algorithm` must list at least one algorithm".into()));
        }
        let sizes = self.sizes();
        if sizes.is_empty() {
            return Err(Error::Config("`n` must list at least one ensemble size".into()));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("`n` must be at least 2, got {n}")));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        let model = build_model(&self.model, &self.model_params)?;
        for &n in &sizes {
            self.eki_config(n, false).validate()?;
            self.eki_config(n, true).validate()?;
            self.abc_smc_config(n).validate()?;
            self.abc_mcmc_config(n).validate()?;
        }
        Ok(model)
    }

    pub fn eki_config(&self, n: usize, optimisation: bool) -> EkiConfig {
        EkiConfig {
            n_particles: n,
            rho: self.eki.rho,
            upsilon: self.eki.upsilon,
            lambda_max: self.eki.lambda_max,
            max_iters: self.eki.max_iters,
            stop_mode: if optimisation { StopMode::Optimisation } else { StopMode::Sampling },
            bisect_tol: self.eki.bisect_tol,
            jitter: self.eki.jitter,
            keep_snapshots: self.snapshots,
        }
    }

    pub fn abc_smc_config(&self, n: usize) -> AbcSmcConfig {
        AbcSmcConfig {
            n_particles: n,
            ess_kappa_target: self.abc_smc.ess_kappa_target,
            resample_threshold: self.abc_smc.resample_threshold,
            stop_acceptance: self.abc_smc.stop_acceptance,
            rw_scale: self.abc_smc.rw_scale,
            initial_kappa: self.abc_smc.initial_kappa,
            max_iters: self.abc_smc.max_iters,
            keep_snapshots: self.snapshots,
            ..AbcSmcConfig::default()
        }
    }

    pub fn abc_mcmc_config(&self, n: usize) -> AbcMcmcConfig {
        AbcMcmcConfig {
            n_steps: n * self.abc_mcmc.steps_per_particle,
            target_acceptance: self.abc_mcmc.target_acceptance,
            gain_exponent: self.abc_mcmc.gain_exponent,
            initial_kappa: self.abc_mcmc.initial_kappa,
            adapt_start: self.abc_mcmc.adapt_start,
            burn_in: self.abc_mcmc.burn_in,
            n_keep: Some(n),
            ..AbcMcmcConfig::default()
        }
    }

    /// `output` if set, else `$EKIGL_OUTPUT_ROOT/<name>` (default root `results`).
    pub fn output_dir(&self, name: &str) -> PathBuf {
        if let Some(p) = &self.output {
            return p.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
        root.join(name)
    }
}
