//! Ensemble Kalman inversion for models whose likelihood can only be simulated.
//!
//! The crate is organised around five pieces:
//!
//! * [`ensemble`]: the particle container and the empirical moments every update needs.
//! * [`eki`]: the generalised ensemble Kalman inversion driver with adaptive tempering,
//!   plus the classic additive-Gaussian iterate used as a reference.
//! * [`models`]: the simulator abstraction, the g-and-k and stochastic Lorenz 96
//!   benchmarks and a linear-Gaussian model with closed-form posteriors.
//! * [`abc`]: ABC-SMC and ABC-MCMC baselines.
//! * [`harness`]: experiment configuration, sweeps, metrics and output files.
//!
//! Parameters are always handled in the model's *working* (unconstrained) space;
//! [`models::SimulatorModel::to_natural`] maps them back for reporting.

pub mod abc;
pub mod eki;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod rng;

pub use ensemble::{compute_moments, ess, mvn_sample, Ensemble, GaussPair, MomentSet};
pub use error::{Error, Result};
pub use models::SimulatorModel;
