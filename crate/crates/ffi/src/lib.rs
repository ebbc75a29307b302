//! C ABI for `ekigl`.
//!
//! Models and run results are opaque handles created and freed by this
//! library. Every fallible function returns an [`EkiglStatus`]; on failure the
//! message is available from [`ekigl_last_error_message`] on the same thread.
//!
//! Matrices cross the boundary as row-major `double` buffers. Ensembles are
//! `n × d` with one particle per row.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ekigl::abc::{run_abc_mcmc, run_abc_smc, AbcMcmcConfig, AbcSmcConfig};
use ekigl::eki::{run_eki, EkiConfig, RunResult, Schedule, StopMode};
use ekigl::models::gk::{gk_quantile, GkParams};
use ekigl::models::lingauss::linear_gaussian_posterior;
use ekigl::models::{build_model, sample_prior_matrix, SimulatorModel};
use ekigl::rng::{substream, Stream};
use ekigl::{Error, GaussPair};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkiglStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Simulation = 5,
    Config = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

impl From<&Error> for EkiglStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::AtIteration { source, .. } => EkiglStatus::from(source.as_ref()),
            Error::TooFewParticles(_) | Error::InvalidArgument(_) | Error::InvalidWeights(_) => EkiglStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => EkiglStatus::DimensionMismatch,
            Error::NonFinite(_) | Error::NotFactorizable { .. } => EkiglStatus::Numerical,
            Error::Simulation(_) => EkiglStatus::Simulation,
            Error::Config(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => EkiglStatus::Config,
        }
    }
}

/// Inverse-temperature stopping rule for `ekigl_run_eki`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkiglEkiMode {
    Sampling = 0,
    Optimisation = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(EkiglStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(EkiglStatus::from(&e), e.to_string())
    }
}

fn fail<T>(status: EkiglStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EkiglStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EkiglStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            EkiglStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(EkiglStatus::NullPointer, format!("{what} is null"));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, needed: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len < needed {
        return fail(
            EkiglStatus::BufferTooSmall,
            format!("{what} needs {needed} values, buffer holds {len}"),
        );
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(EkiglStatus::NullPointer, format!("{what} is null"));
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .map_or_else(|| fail(EkiglStatus::NullPointer, format!("{what} is null")), Ok)
}

fn write_row_major(m: &DMatrix<f64>, out: &mut [f64]) {
    let cols = m.ncols();
    for (idx, v) in out.iter_mut().enumerate() {
        *v = m[(idx / cols, idx % cols)];
    }
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn ekigl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ekigl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque simulator model.
pub struct EkiglModel {
    inner: Box<dyn SimulatorModel>,
}

/// Builds a registered model (`"gk"`, `"l96"`, `"lingauss"`). `overrides_toml`
/// may be null or a TOML document of model parameters.
///
/// # Safety
/// `name` and `overrides_toml` must be null or valid nul-terminated strings;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ekigl_model_new(
    name: *const c_char,
    overrides_toml: *const c_char,
    out: *mut *mut EkiglModel,
) -> EkiglStatus {
    guard(|| {
        if name.is_null() || out.is_null() {
            return fail(EkiglStatus::NullPointer, "name and out must not be null");
        }
        *out = ptr::null_mut();
        let name = CStr::from_ptr(name)
            .to_str()
            .or_else(|_| fail(EkiglStatus::InvalidArgument, "name is not UTF-8"))?;
        let table = if overrides_toml.is_null() {
            toml::Table::new()
        } else {
            let text = CStr::from_ptr(overrides_toml)
                .to_str()
                .or_else(|_| fail(EkiglStatus::InvalidArgument, "overrides are not UTF-8"))?;
            text.parse::<toml::Table>()
                .or_else(|e| fail(EkiglStatus::Config, format!("overrides: {e}")))?
        };
        let inner = build_model(name, &table)?;
        *out = Box::into_raw(Box::new(EkiglModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `ekigl_model_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ekigl_model_free(model: *mut EkiglModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parameter dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ekigl_model_dim_x(model: *const EkiglModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim_x())
}

/// Data dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ekigl_model_dim_y(model: *const EkiglModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim_y())
}

/// Draws `count` prior particles into `out` (`count × dim_x`, row-major).
///
/// # Safety
/// `model` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ekigl_model_sample_prior(
    model: *const EkiglModel,
    count: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> EkiglStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let dx = m.inner.dim_x();
        let out = output(out, out_len, count * dx, "prior draws")?;
        let draws = sample_prior_matrix(m.inner.as_ref(), count, seed);
        out.copy_from_slice(draws.as_slice());
        Ok(())
    })
}

/// One likelihood simulation at working-space parameters `x`.
///
/// # Safety
/// `x` must hold `x_len` doubles and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ekigl_model_simulate(
    model: *const EkiglModel,
    x: *const f64,
    x_len: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> EkiglStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let x = input(x, x_len, "x")?;
        if x.len() != m.inner.dim_x() {
            return Err(Error::DimensionMismatch {
                what: "parameters",
                expected: m.inner.dim_x(),
                got: x.len(),
            }
            .into());
        }
        let out = output(out, out_len, m.inner.dim_y(), "simulated data")?;
        let y = m.inner.simulate(x, &mut substream(seed, Stream::Simulate, &[]))?;
        out.copy_from_slice(&y);
        Ok(())
    })
}

/// Maps working-space parameters to the model's natural parameterisation.
///
/// # Safety
/// `x` must hold `x_len` doubles and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ekigl_model_to_natural(
    model: *const EkiglModel,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> EkiglStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let x = input(x, x_len, "x")?;
        let out = output(out, out_len, x.len(), "natural parameters")?;
        out.copy_from_slice(&m.inner.to_natural(x));
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkiglEkiOptions {
    pub n_particles: usize,
    pub rho: f64,
    pub upsilon: f64,
    pub lambda_max: f64,
    pub max_iters: usize,
    pub bisect_tol: f64,
    pub mode: EkiglEkiMode,
}

#[no_mangle]
pub extern "C" fn ekigl_eki_options_default() -> EkiglEkiOptions {
    let d = EkiConfig::default();
    EkiglEkiOptions {
        n_particles: d.n_particles,
        rho: d.rho,
        upsilon: d.upsilon,
        lambda_max: d.lambda_max,
        max_iters: d.max_iters,
        bisect_tol: d.bisect_tol,
        mode: EkiglEkiMode::Sampling,
    }
}

/// ABC-SMC settings; `NaN` in `rw_scale` or `initial_kappa` selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkiglAbcSmcOptions {
    pub n_particles: usize,
    pub ess_kappa_target: f64,
    pub resample_threshold: f64,
    pub stop_acceptance: f64,
    pub rw_scale: f64,
    pub initial_kappa: f64,
    pub max_iters: usize,
}

#[no_mangle]
pub extern "C" fn ekigl_abc_smc_options_default() -> EkiglAbcSmcOptions {
    let d = AbcSmcConfig::default();
    EkiglAbcSmcOptions {
        n_particles: d.n_particles,
        ess_kappa_target: d.ess_kappa_target,
        resample_threshold: d.resample_threshold,
        stop_acceptance: d.stop_acceptance,
        rw_scale: f64::NAN,
        initial_kappa: f64::NAN,
        max_iters: d.max_iters,
    }
}

/// ABC-MCMC settings; `NaN` in `initial_kappa` selects the default and
/// `n_keep = 0` keeps every post-burn-in state.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkiglAbcMcmcOptions {
    pub n_steps: usize,
    pub target_acceptance: f64,
    pub gain_exponent: f64,
    pub initial_kappa: f64,
    pub proposal_scale: f64,
    pub adapt_start: usize,
    pub burn_in: f64,
    pub n_keep: usize,
}

#[no_mangle]
pub extern "C" fn ekigl_abc_mcmc_options_default() -> EkiglAbcMcmcOptions {
    let d = AbcMcmcConfig::default();
    EkiglAbcMcmcOptions {
        n_steps: d.n_steps,
        target_acceptance: d.target_acceptance,
        gain_exponent: d.gain_exponent,
        initial_kappa: f64::NAN,
        proposal_scale: d.proposal_scale,
        adapt_start: d.adapt_start,
        burn_in: d.burn_in,
        n_keep: 0,
    }
}

fn optional(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Opaque output of a run.
pub struct EkiglResult {
    inner: RunResult,
}

unsafe fn run_common(
    model: *const EkiglModel,
    observed: *const f64,
    observed_len: usize,
    out: *mut *mut EkiglResult,
    run: impl FnOnce(&dyn SimulatorModel, &DVector<f64>) -> ekigl::Result<RunResult>,
) -> EkiglStatus {
    guard(|| {
        if out.is_null() {
            return fail(EkiglStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let m = handle(model, "model")?;
        let y = DVector::from_column_slice(input(observed, observed_len, "observed")?);
        let inner = run(m.inner.as_ref(), &y)?;
        *out = Box::into_raw(Box::new(EkiglResult { inner }));
        Ok(())
    })
}

/// Runs ensemble Kalman inversion. A null `options` uses the defaults.
///
/// # Safety
/// Pointers must be valid; `observed` must hold `observed_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ekigl_run_eki(
    model: *const EkiglModel,
    observed: *const f64,
    observed_len: usize,
    options: *const EkiglEkiOptions,
    seed: u64,
    out: *mut *mut EkiglResult,
) -> EkiglStatus {
    let o = options.as_ref().copied().unwrap_or_else(|| ekigl_eki_options_default());
    let config = EkiConfig {
        n_particles: o.n_particles,
        rho: o.rho,
        upsilon: o.upsilon,
        lambda_max: o.lambda_max,
        max_iters: o.max_iters,
        bisect_tol: o.bisect_tol,
        stop_mode: match o.mode {
            EkiglEkiMode::Sampling => StopMode::Sampling,
            EkiglEkiMode::Optimisation => StopMode::Optimisation,
        },
        ..EkiConfig::default()
    };
    run_common(model, observed, observed_len, out, |m, y| run_eki(m, y, &config, seed))
}

/// Runs ABC-SMC. A null `options` uses the defaults.
///
/// # Safety
/// Pointers must be valid; `observed` must hold `observed_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ekigl_run_abc_smc(
    model: *const EkiglModel,
    observed: *const f64,
    observed_len: usize,
    options: *const EkiglAbcSmcOptions,
    seed: u64,
    out: *mut *mut EkiglResult,
) -> EkiglStatus {
    let o = options.as_ref().copied().unwrap_or_else(|| ekigl_abc_smc_options_default());
    let config = AbcSmcConfig {
        n_particles: o.n_particles,
        ess_kappa_target: o.ess_kappa_target,
        resample_threshold: o.resample_threshold,
        stop_acceptance: o.stop_acceptance,
        rw_scale: optional(o.rw_scale),
        initial_kappa: optional(o.initial_kappa),
        max_iters: o.max_iters,
        ..AbcSmcConfig::default()
    };
    run_common(model, observed, observed_len, out, |m, y| run_abc_smc(m, y, &config, seed))
}

/// Runs ABC-MCMC. A null `options` uses the defaults.
///
/// # Safety
/// Pointers must be valid; `observed` must hold `observed_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ekigl_run_abc_mcmc(
    model: *const EkiglModel,
    observed: *const f64,
    observed_len: usize,
    options: *const EkiglAbcMcmcOptions,
    seed: u64,
    out: *mut *mut EkiglResult,
) -> EkiglStatus {
    let o = options.as_ref().copied().unwrap_or_else(|| ekigl_abc_mcmc_options_default());
    let config = AbcMcmcConfig {
        n_steps: o.n_steps,
        target_acceptance: o.target_acceptance,
        gain_exponent: o.gain_exponent,
        initial_kappa: optional(o.initial_kappa),
        proposal_scale: o.proposal_scale,
        adapt_start: o.adapt_start,
        burn_in: o.burn_in,
        n_keep: (o.n_keep > 0).then_some(o.n_keep),
        ..AbcMcmcConfig::default()
    };
    run_common(model, observed, observed_len, out, |m, y| run_abc_mcmc(m, y, &config, seed))
}

/// # Safety
/// `result` must be null or a handle from one of the run functions not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_free(result: *mut EkiglResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of particles in the final ensemble, or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_n_particles(result: *const EkiglResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.ensemble.n())
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_dim_x(result: *const EkiglResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.ensemble.dim_x())
}

/// Simulations consumed, or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_sim_count(result: *const EkiglResult) -> u64 {
    result.as_ref().map_or(0, |r| r.inner.sim_count)
}

/// Final inverse temperature (EKI) or tolerance (ABC); `NaN` for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_final_value(result: *const EkiglResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.schedule.final_value())
}

/// Overall acceptance rate of ABC runs; `NaN` for EKI or a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_acceptance_rate(result: *const EkiglResult) -> f64 {
    result
        .as_ref()
        .and_then(|r| r.inner.acceptance_rate)
        .unwrap_or(f64::NAN)
}

/// Termination reason as a static string, or null for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_termination(result: *const EkiglResult) -> *const c_char {
    let Some(r) = result.as_ref() else {
        return ptr::null();
    };
    let s: &'static str = match r.inner.termination.as_str() {
        "sampling" => "sampling\0",
        "optimisation" => "optimisation\0",
        "discrepancy" => "discrepancy\0",
        "max_iters" => "max_iters\0",
        "acceptance" => "acceptance\0",
        _ => "chain_complete\0",
    };
    s.as_ptr().cast()
}

/// Final ensemble in working space, `n × dim_x` row-major.
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_params(result: *const EkiglResult, out: *mut f64, out_len: usize) -> EkiglStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let p = r.inner.ensemble.params();
        let out = output(out, out_len, p.len(), "ensemble")?;
        out.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// Number of schedule entries.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_schedule_len(result: *const EkiglResult) -> usize {
    result.as_ref().map_or(0, |r| match &r.inner.schedule {
        Schedule::Temper(t) => t.steps.len(),
        Schedule::Tolerance(t) => t.len(),
    })
}

/// Realized temperatures (EKI) or tolerances (ABC), in order.
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ekigl_result_schedule(result: *const EkiglResult, out: *mut f64, out_len: usize) -> EkiglStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let values: Vec<f64> = match &r.inner.schedule {
            Schedule::Temper(t) => t.steps.iter().map(|s| s.lambda).collect(),
            Schedule::Tolerance(t) => t.iter().map(|s| s.kappa).collect(),
        };
        let out = output(out, out_len, values.len(), "schedule")?;
        out.copy_from_slice(&values);
        Ok(())
    })
}

/// g-and-k quantile at `u ∈ (0, 1)` with the conventional `c = 0.8`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ekigl_gk_quantile(u: f64, a: f64, b: f64, g: f64, k: f64, out: *mut f64) -> EkiglStatus {
    guard(|| {
        let out = output(out, 1, 1, "out")?;
        out[0] = gk_quantile(u, &GkParams::new(a, b, g, k))?;
        Ok(())
    })
}

/// Posterior of `x ~ N(m, P)`, `y | x ~ N(Hx, R)`. All matrices row-major:
/// `prior_cov` and `post_cov` are `d_x × d_x`, `h` is `d_y × d_x`, `r` is `d_y × d_y`.
///
/// # Safety
/// Every pointer must hold the number of doubles implied by `d_x` and `d_y`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ekigl_linear_gaussian_posterior(
    d_x: usize,
    d_y: usize,
    prior_mean: *const f64,
    prior_cov: *const f64,
    h: *const f64,
    r: *const f64,
    y: *const f64,
    post_mean: *mut f64,
    post_cov: *mut f64,
) -> EkiglStatus {
    guard(|| {
        if d_x == 0 || d_y == 0 {
            return fail(EkiglStatus::InvalidArgument, "dimensions must be positive");
        }
        let prior = GaussPair::new(
            DVector::from_column_slice(input(prior_mean, d_x, "prior_mean")?),
            DMatrix::from_row_slice(d_x, d_x, input(prior_cov, d_x * d_x, "prior_cov")?),
        )?;
        let h = DMatrix::from_row_slice(d_y, d_x, input(h, d_y * d_x, "h")?);
        let r = DMatrix::from_row_slice(d_y, d_y, input(r, d_y * d_y, "r")?);
        let y = DVector::from_column_slice(input(y, d_y, "y")?);
        let post = linear_gaussian_posterior(&prior, &h, &r, &y)?;
        output(post_mean, d_x, d_x, "post_mean")?.copy_from_slice(post.mean.as_slice());
        write_row_major(&post.cov, output(post_cov, d_x * d_x, d_x * d_x, "post_cov")?);
        Ok(())
    })
}
