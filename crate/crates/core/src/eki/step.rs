use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::ensemble::{column, Ensemble, MomentSet};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, JitterPolicy};
use crate::rng::{substream, Stream};

/// Moves every particle by `cross · bracket⁻¹ (y − predictedᵢ − ηᵢ)` with
/// `ηᵢ ~ N(0, noise)`. `noise = None` (or an all-zero matrix) means `ηᵢ = 0`
/// and no random numbers are drawn.
///
/// One factorization of `bracket` is shared by all particles. Particle `i`
/// draws from substream `(seed, Perturb, iteration, i)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn perturbed_move(
    params: &DMatrix<f64>,
    predicted: &DMatrix<f64>,
    observed: &DVector<f64>,
    cross: &DMatrix<f64>,
    bracket: &DMatrix<f64>,
    noise: Option<&DMatrix<f64>>,
    jitter: &JitterPolicy,
    seed: u64,
    iteration: usize,
) -> Result<DMatrix<f64>> {
    let n = params.ncols();
    let dy = predicted.nrows();
    if observed.len() != dy {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: dy,
            got: observed.len(),
        });
    }
    let noise_factor = match noise {
        Some(c) if c.iter().any(|&v| v != 0.0) => {
            Some(cholesky_jittered(c, jitter, "perturbation covariance")?.chol.l())
        }
        _ => None,
    };
    let gain_chol = cholesky_jittered(bracket, jitter, "Kalman gain matrix")?.chol;

    let innovation_of = |i: usize| -> Vec<f64> {
        let mut v: Vec<f64> = observed
            .iter()
            .zip(column(predicted, i))
            .map(|(y, p)| y - p)
            .collect();
        if let Some(l) = &noise_factor {
            let mut rng = substream(seed, Stream::Perturb, &[iteration as u64, i as u64]);
            let z = DVector::from_fn(dy, |_, _| StandardNormal.sample(&mut rng));
            let eta = l * z;
            for (vi, e) in v.iter_mut().zip(eta.iter()) {
                *vi -= e;
            }
        }
        v
    };
    let cols: Vec<Vec<f64>> = (0..n).into_par_iter().map(innovation_of).collect();
    let innovations = DMatrix::from_iterator(dy, n, cols.into_iter().flatten());
    let solved = gain_chol.solve(&innovations);
    let moved = params + cross * solved;
    if moved.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("moved particles"));
    }
    Ok(moved)
}

/// `max(h⁻¹ − 1, 0)`.
pub(crate) fn noise_scale(h: f64) -> f64 {
    (1.0 / h - 1.0).max(0.0)
}

/// One generalised ensemble Kalman move with stepsize `h`:
///
/// `xᵢ ← xᵢ + C^xy (C^yy + s C^{y|x})⁻¹ (y − yᵢ − ηᵢ)`, `ηᵢ ~ N(0, s C^{y|x})`,
/// with `s = max(h⁻¹ − 1, 0)`. At `h = 1` the perturbations are exactly zero.
pub fn eki_step(
    ensemble: &Ensemble,
    observed: &DVector<f64>,
    h: f64,
    moments: &MomentSet,
    jitter: &JitterPolicy,
    seed: u64,
) -> Result<Ensemble> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("stepsize must be positive and finite, got {h}")));
    }
    let sims = ensemble
        .sims()
        .ok_or_else(|| Error::InvalidArgument("ensemble has no simulated data".into()))?;
    let iteration = ensemble.iteration();
    let s = noise_scale(h);
    let (bracket, noise) = if s == 0.0 {
        (moments.cov_yy.clone(), None)
    } else {
        let noise = &moments.cov_y_given_x * s;
        (&moments.cov_yy + &noise, Some(noise))
    };
    let moved = perturbed_move(
        ensemble.params(),
        sims,
        observed,
        &moments.cov_xy,
        &bracket,
        noise.as_ref(),
        jitter,
        seed,
        iteration,
    )
    .map_err(|e| e.at_iteration(iteration + 1))?;
    Ok(Ensemble::new(moved)?.with_iteration(iteration + 1))
}
