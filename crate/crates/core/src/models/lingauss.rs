//! Linear-Gaussian model `x ~ N(m, Q)`, `y | x ~ N(Hx, R)` and its closed-form
//! (tempered) posteriors.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;

use crate::ensemble::GaussPair;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, symmetrize, JitterPolicy};
use crate::models::SimulatorModel;
use crate::rng::SimRng;

/// Conditions `prior` on `y = Hx + ε`, `ε ~ N(0, noise)`.
fn condition(prior: &GaussPair, h: &DMatrix<f64>, noise: &DMatrix<f64>, y: &DVector<f64>) -> Result<GaussPair> {
    check_dims(prior, h, noise, y)?;
    let hq = h * &prior.cov;
    let mut s = &hq * h.transpose() + noise;
    symmetrize(&mut s);
    let chol = cholesky_jittered(&s, &JitterPolicy::none(), "innovation covariance")?.chol;
    // K = Q Hᵀ S⁻¹ = (S⁻¹ H Q)ᵀ
    let gain = chol.solve(&hq).transpose();
    let mean = &prior.mean + &gain * (y - h * &prior.mean);
    let mut cov = &prior.cov - &gain * hq;
    symmetrize(&mut cov);
    Ok(GaussPair { mean, cov })
}

fn check_dims(prior: &GaussPair, h: &DMatrix<f64>, r: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if h.ncols() != prior.dim() {
        return Err(Error::DimensionMismatch {
            what: "H columns",
            expected: prior.dim(),
            got: h.ncols(),
        });
    }
    if r.nrows() != h.nrows() || r.ncols() != h.nrows() {
        return Err(Error::DimensionMismatch {
            what: "noise covariance",
            expected: h.nrows(),
            got: r.nrows(),
        });
    }
    if y.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: h.nrows(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Exact posterior `N(m^y, Q^y)`.
pub fn linear_gaussian_posterior(prior: &GaussPair, h: &DMatrix<f64>, r: &DMatrix<f64>, y: &DVector<f64>) -> Result<GaussPair> {
    condition(prior, h, r, y)
}

/// Tempered posterior `∝ p(x) p(y|x)^λ`, i.e. conditioning with noise `λ⁻¹R`.
///
/// `λ = 0` returns the prior.
pub fn linear_gaussian_tempered(
    prior: &GaussPair,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<GaussPair> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("inverse temperature must be >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        check_dims(prior, h, r, y)?;
        return Ok(prior.clone());
    }
    condition(prior, h, &(r * (1.0 / lambda)), y)
}

/// One step of the tempered recursion: condition `current` with noise `h⁻¹R`.
pub fn tempered_recursion_step(
    current: &GaussPair,
    h_op: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
    step: f64,
) -> Result<GaussPair> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("stepsize must be > 0, got {step}")));
    }
    condition(current, h_op, &(r * (1.0 / step)), y)
}

/// Linear-Gaussian simulator model.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    pub prior: GaussPair,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    prior_chol: DMatrix<f64>,
    noise_chol: DMatrix<f64>,
    prior_precision: DMatrix<f64>,
}

impl LinearGaussianModel {
    pub fn new(prior: GaussPair, h: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        check_dims(&prior, &h, &r, &DVector::zeros(h.nrows()))?;
        let pc = cholesky_jittered(&prior.cov, &JitterPolicy::none(), "prior covariance")?.chol;
        let prior_precision = pc.inverse();
        let prior_chol = pc.l();
        let noise_chol = cholesky_jittered(&r, &JitterPolicy::none(), "noise covariance")?.chol.l();
        let mut r = r;
        symmetrize(&mut r);
        Ok(Self {
            prior,
            h,
            r,
            prior_chol,
            noise_chol,
            prior_precision,
        })
    }

    /// The scalar model `m = 0, Q = 1, H = 1, R = 1`.
    pub fn scalar() -> Self {
        Self::new(
            GaussPair::new(DVector::from_element(1, 0.0), DMatrix::identity(1, 1)).unwrap(),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
        )
        .unwrap()
    }

    /// A random well-conditioned model, reproducible from `seed`.
    pub fn random(dim_x: usize, dim_y: usize, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut normal = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mean = normal(dim_x, 1).column(0).into_owned();
        let a = normal(dim_x, dim_x);
        let q = &a * a.transpose() / dim_x as f64 + DMatrix::identity(dim_x, dim_x) * 0.5;
        let h = normal(dim_y, dim_x);
        let b = normal(dim_y, dim_y);
        let r = &b * b.transpose() / dim_y as f64 + DMatrix::identity(dim_y, dim_y) * 0.5;
        Self::new(GaussPair::new(mean, q).unwrap(), h, r).unwrap()
    }

    pub fn posterior(&self, y: &DVector<f64>) -> Result<GaussPair> {
        linear_gaussian_posterior(&self.prior, &self.h, &self.r, y)
    }

    pub fn forward(&self, x: &[f64]) -> DVector<f64> {
        &self.h * DVector::from_column_slice(x)
    }
}

fn std_normal_vec(d: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

impl SimulatorModel for LinearGaussianModel {
    fn name(&self) -> &str {
        "lingauss"
    }

    fn dim_x(&self) -> usize {
        self.prior.dim()
    }

    fn dim_y(&self) -> usize {
        self.h.nrows()
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let z = std_normal_vec(self.dim_x(), rng);
        (&self.prior.mean + &self.prior_chol * z).iter().copied().collect()
    }

    fn log_prior(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.prior.mean;
        -0.5 * d.dot(&(&self.prior_precision * &d))
    }

    fn simulate(&self, x: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let z = std_normal_vec(self.dim_y(), rng);
        Ok((self.forward(x) + &self.noise_chol * z).iter().copied().collect())
    }
}
