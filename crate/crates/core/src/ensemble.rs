//! Particle ensembles and their empirical moments.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, symmetrize, JitterPolicy};

/// A set of `N` parameter particles, optionally paired with simulated data.
///
/// Particles are stored one per column: `params` is `d_x × N` and `sims`
/// is `d_y × N`, so each particle's coordinates are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    params: DMatrix<f64>,
    sims: Option<DMatrix<f64>>,
    iteration: usize,
}

impl Ensemble {
    pub fn new(params: DMatrix<f64>) -> Result<Self> {
        if params.ncols() < 2 {
            return Err(Error::TooFewParticles(params.ncols()));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ensemble parameters"));
        }
        Ok(Self {
            params,
            sims: None,
            iteration: 0,
        })
    }

    /// Builds an ensemble from row-per-particle data.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(columns_to_matrix(rows)?)
    }

    pub fn with_sims(mut self, sims: DMatrix<f64>) -> Result<Self> {
        if sims.ncols() != self.params.ncols() {
            return Err(Error::DimensionMismatch {
                what: "simulated data particle count",
                expected: self.params.ncols(),
                got: sims.ncols(),
            });
        }
        if sims.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("simulated data"));
        }
        self.sims = Some(sims);
        Ok(self)
    }

    pub fn with_iteration(mut self, iteration: usize) -> Self {
        self.iteration = iteration;
        self
    }

    pub fn n(&self) -> usize {
        self.params.ncols()
    }

    pub fn dim_x(&self) -> usize {
        self.params.nrows()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn params(&self) -> &DMatrix<f64> {
        &self.params
    }

    pub fn sims(&self) -> Option<&DMatrix<f64>> {
        self.sims.as_ref()
    }

    pub fn into_params(self) -> DMatrix<f64> {
        self.params
    }

    /// Coordinates of particle `i`.
    pub fn particle(&self, i: usize) -> &[f64] {
        column(&self.params, i)
    }

    /// Simulated data of particle `i`, if present.
    pub fn sim(&self, i: usize) -> Option<&[f64]> {
        self.sims.as_ref().map(|s| column(s, i))
    }

    pub fn particles(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n()).map(move |i| self.particle(i))
    }

    pub fn mean(&self) -> DVector<f64> {
        row_means(&self.params)
    }

    /// Empirical covariance of the parameters with `1/(N-1)` normalization.
    pub fn cov(&self) -> DMatrix<f64> {
        let centered = centered(&self.params, &self.mean());
        let mut c = &centered * centered.transpose() / (self.n() as f64 - 1.0);
        symmetrize(&mut c);
        c
    }
}

pub(crate) fn column(m: &DMatrix<f64>, i: usize) -> &[f64] {
    let d = m.nrows();
    &m.as_slice()[i * d..(i + 1) * d]
}

pub(crate) fn columns_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(d * rows.len());
    for r in rows {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                what: "particle dimension",
                expected: d,
                got: r.len(),
            });
        }
        data.extend_from_slice(r);
    }
    Ok(DMatrix::from_vec(d, rows.len(), data))
}

fn row_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.ncols() as f64;
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum() / n))
}

fn centered(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    for mut col in c.column_iter_mut() {
        col -= mean;
    }
    c
}

/// Empirical means and covariances of a simulated ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub mean_x: DVector<f64>,
    pub mean_y: DVector<f64>,
    pub cov_xx: DMatrix<f64>,
    pub cov_xy: DMatrix<f64>,
    pub cov_yy: DMatrix<f64>,
    /// `C^yy − C^yx (C^xx)⁻¹ C^xy`; symmetrized, not forced PSD.
    pub cov_y_given_x: DMatrix<f64>,
}

/// Means, auto- and cross-covariances of paired particle sets, without the
/// conditional covariance.
pub(crate) fn cross_moments(
    params: &DMatrix<f64>,
    sims: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = params.ncols();
    if n < 2 {
        return Err(Error::TooFewParticles(n));
    }
    if sims.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "simulated data particle count",
            expected: n,
            got: sims.ncols(),
        });
    }
    if params.iter().chain(sims.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ensemble"));
    }
    let norm = 1.0 / (n as f64 - 1.0);
    let mean_x = row_means(params);
    let mean_y = row_means(sims);
    let xc = centered(params, &mean_x);
    let yc = centered(sims, &mean_y);
    let mut cov_xx = &xc * xc.transpose() * norm;
    let cov_xy = &xc * yc.transpose() * norm;
    let mut cov_yy = &yc * yc.transpose() * norm;
    symmetrize(&mut cov_xx);
    symmetrize(&mut cov_yy);
    Ok((mean_x, mean_y, cov_xx, cov_xy, cov_yy))
}

/// Computes every moment the generalised update needs.
///
/// Requires simulated data on the ensemble. `C^xx` is inverted through a
/// Cholesky solve; `jitter` governs the fallback for singular `C^xx`.
pub fn compute_moments(ensemble: &Ensemble, jitter: &JitterPolicy) -> Result<MomentSet> {
    let sims = ensemble
        .sims()
        .ok_or_else(|| Error::InvalidArgument("ensemble has no simulated data".into()))?;
    let (mean_x, mean_y, cov_xx, cov_xy, cov_yy) = cross_moments(ensemble.params(), sims)?;
    let factor = cholesky_jittered(&cov_xx, jitter, "parameter covariance C^xx")?;
    let solved = factor.chol.solve(&cov_xy);
    let mut cov_y_given_x = &cov_yy - cov_xy.transpose() * solved;
    symmetrize(&mut cov_y_given_x);
    Ok(MomentSet {
        mean_x,
        mean_y,
        cov_xx,
        cov_xy,
        cov_yy,
        cov_y_given_x,
    })
}

/// Effective sample size `(Σ w²)⁻¹` of normalized weights.
///
/// Unnormalized weights are accepted and normalized first, so the result is
/// invariant to scaling.
pub fn ess(weights: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &w in weights {
        if !w.is_finite() {
            return Err(Error::InvalidWeights("non-finite weight".into()));
        }
        if w < 0.0 {
            return Err(Error::InvalidWeights(format!("negative weight {w}")));
        }
        sum += w;
        sum_sq += w * w;
    }
    if sum <= 0.0 {
        return Err(Error::InvalidWeights("weights sum to zero".into()));
    }
    Ok(sum * sum / sum_sq)
}

/// Mean vector and covariance matrix of a Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPair {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussPair {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                what: "Gaussian covariance",
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        let mut cov = cov;
        symmetrize(&mut cov);
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Draws `count` samples (one per column) from `gauss`.
///
/// An all-zero covariance returns copies of the mean without touching `rng`.
pub fn mvn_sample(
    gauss: &GaussPair,
    count: usize,
    jitter: &JitterPolicy,
    rng: &mut dyn RngCore,
) -> Result<DMatrix<f64>> {
    let d = gauss.dim();
    let mut out = DMatrix::from_fn(d, count, |i, _| gauss.mean[i]);
    if gauss.cov.iter().all(|&v| v == 0.0) {
        return Ok(out);
    }
    let l = cholesky_jittered(&gauss.cov, jitter, "Gaussian covariance")?.chol.l();
    let mut z = DVector::zeros(d);
    for j in 0..count {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        let draw = &l * &z;
        for i in 0..d {
            out[(i, j)] += draw[i];
        }
    }
    Ok(out)
}
