//! Simulator models: the interface every algorithm consumes plus the
//! benchmark problems.

pub mod gk;
pub mod l96;
pub mod lingauss;
pub mod normal;
pub mod registry;
pub mod transform;

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;

use crate::ensemble::column;
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

pub use gk::{GkModel, GkParams};
pub use l96::{L96Config, L96Model};
pub use lingauss::LinearGaussianModel;
pub use registry::{build_model, list_models};

/// A Bayesian model given by a prior sampler and a likelihood simulator.
///
/// Parameters live in the model's working space, which for bounded
/// parameters is the unconstrained image of the natural space.
pub trait SimulatorModel: Send + Sync {
    fn name(&self) -> &str;

    fn dim_x(&self) -> usize;

    fn dim_y(&self) -> usize;

    /// One draw from the prior, in working space.
    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Prior log density in working space (up to a constant), including any
    /// transform Jacobian.
    fn log_prior(&self, x: &[f64]) -> f64;

    /// One draw of data from the likelihood at `x`.
    fn simulate(&self, x: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>>;

    /// Maps working-space parameters to the natural parameterisation.
    fn to_natural(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    /// A fixed ground truth (working space) used by experiments, if the model has one.
    fn fixed_truth(&self) -> Option<Vec<f64>> {
        None
    }

    /// Whether `simulate` may be called concurrently.
    fn parallel_safe(&self) -> bool {
        true
    }
}

/// Draws `count` prior particles (one per column), particle `i` from its own substream.
pub fn sample_prior_matrix(model: &dyn SimulatorModel, count: usize, seed: u64) -> DMatrix<f64> {
    let dx = model.dim_x();
    let draw = |i: usize| model.sample_prior(&mut substream(seed, Stream::Prior, &[i as u64]));
    let cols: Vec<Vec<f64>> = if model.parallel_safe() {
        (0..count).into_par_iter().map(draw).collect()
    } else {
        (0..count).map(draw).collect()
    };
    DMatrix::from_iterator(dx, count, cols.into_iter().flatten())
}

/// Simulates data for every column of `params`.
///
/// Particle `i` at round `round` uses substream `(seed, Simulate, round, i)`, so
/// the output does not depend on whether the model runs in parallel.
pub fn simulate_matrix(
    model: &dyn SimulatorModel,
    params: &DMatrix<f64>,
    seed: u64,
    round: u64,
) -> Result<DMatrix<f64>> {
    let n = params.ncols();
    let dy = model.dim_y();
    let run = |i: usize| -> Result<Vec<f64>> {
        let mut rng = substream(seed, Stream::Simulate, &[round, i as u64]);
        let y = model.simulate(column(params, i), &mut rng)?;
        if y.len() != dy {
            return Err(Error::DimensionMismatch {
                what: "simulated data",
                expected: dy,
                got: y.len(),
            });
        }
        Ok(y)
    };
    let cols: Vec<Vec<f64>> = if model.parallel_safe() {
        (0..n).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..n).map(run).collect::<Result<_>>()?
    };
    Ok(DMatrix::from_iterator(dy, n, cols.into_iter().flatten()))
}
