//! Name-keyed model construction with parameter overrides.

use nalgebra::{DMatrix, DVector};
use toml::{Table, Value};

use crate::ensemble::GaussPair;
use crate::error::{Error, Result};
use crate::models::{GkModel, L96Config, L96Model, LinearGaussianModel, SimulatorModel};

pub const MODEL_NAMES: [&str; 3] = ["gk", "l96", "lingauss"];

/// `(name, one-line description)` for every registered model.
pub fn list_models() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "gk",
            "g-and-k distribution, 4 params (A,B,g,k) with U(0,10) priors; 100 order statistics of 1000 draws",
        ),
        (
            "l96",
            "stochastic Lorenz 96 initial condition, N(F,5I) prior; every other coordinate observed with N(0,0.1) noise",
        ),
        (
            "lingauss",
            "linear-Gaussian model with closed-form posterior (scalar by default)",
        ),
    ]
}

fn get_f64(t: &Table, key: &str) -> Result<Option<f64>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Float(v)) => Ok(Some(*v)),
        Some(Value::Integer(v)) => Ok(Some(*v as f64)),
        Some(v) => Err(Error::Config(format!("`{key}` must be a number, got {v}"))),
    }
}

fn get_usize(t: &Table, key: &str) -> Result<Option<usize>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
        Some(v) => Err(Error::Config(format!("`{key}` must be a non-negative integer, got {v}"))),
    }
}

fn get_f64_array(t: &Table, key: &str) -> Result<Option<Vec<f64>>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| match v {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(Error::Config(format!("`{key}` must be an array of numbers"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(_) => Err(Error::Config(format!("`{key}` must be an array"))),
    }
}

fn get_matrix(t: &Table, key: &str) -> Result<Option<DMatrix<f64>>> {
    let Some(Value::Array(rows)) = t.get(key) else {
        return match t.get(key) {
            None => Ok(None),
            Some(_) => Err(Error::Config(format!("`{key}` must be an array of rows"))),
        };
    };
    let mut sub = Table::new();
    let mut data = Vec::new();
    let mut ncols = None;
    for (i, row) in rows.iter().enumerate() {
        sub.insert("row".into(), row.clone());
        let r = get_f64_array(&sub, "row")?.unwrap_or_default();
        if *ncols.get_or_insert(r.len()) != r.len() {
            return Err(Error::Config(format!("`{key}` row {i} has inconsistent length")));
        }
        data.extend(r);
    }
    Ok(Some(DMatrix::from_row_slice(rows.len(), ncols.unwrap_or(0), &data)))
}

fn reject_unknown(t: &Table, allowed: &[&str], model: &str) -> Result<()> {
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown {model} parameter `{k}`")));
        }
    }
    Ok(())
}

/// Builds a model by name. `overrides` holds model-specific keys:
///
/// * `gk`: `n_raw`, `n_stats`, `c`, `truth` (natural-space A, B, g, k).
/// * `l96`: `d_x`, `forcing`, `dt`, `obs_times`, `obs_noise_var`, `diffusion`, `prior_var`.
/// * `lingauss`: either `dim_x`, `dim_y`, `model_seed` for a random model, or
///   `prior_mean`, `prior_cov`, `h`, `r` for an explicit one.
pub fn build_model(name: &str, overrides: &Table) -> Result<Box<dyn SimulatorModel>> {
    match name {
        "gk" => {
            reject_unknown(overrides, &["n_raw", "n_stats", "c", "truth"], name)?;
            let mut m = GkModel::default();
            if let Some(v) = get_usize(overrides, "n_raw")? {
                m.n_raw = v;
            }
            if let Some(v) = get_usize(overrides, "n_stats")? {
                m.n_stats = v;
            }
            if let Some(v) = get_f64(overrides, "c")? {
                m.c = v;
            }
            if let Some(t) = get_f64_array(overrides, "truth")? {
                m.truth = t
                    .try_into()
                    .map_err(|_| Error::Config("gk `truth` needs 4 values".into()))?;
                m.transform.to_unconstrained(&m.truth)?;
            }
            if m.n_stats == 0 || m.n_stats > m.n_raw {
                return Err(Error::Config("gk needs 0 < n_stats <= n_raw".into()));
            }
            Ok(Box::new(m))
        }
        "l96" => {
            reject_unknown(
                overrides,
                &["d_x", "forcing", "dt", "obs_times", "obs_noise_var", "diffusion", "prior_var"],
                name,
            )?;
            let mut cfg = L96Config::with_dim(get_usize(overrides, "d_x")?.unwrap_or(40));
            if let Some(v) = get_f64(overrides, "forcing")? {
                cfg.forcing = v;
            }
            if let Some(v) = get_f64(overrides, "dt")? {
                cfg.dt = v;
            }
            if let Some(v) = get_f64_array(overrides, "obs_times")? {
                cfg.obs_times = v;
            }
            if let Some(v) = get_f64(overrides, "obs_noise_var")? {
                cfg.obs_noise_var = v;
            }
            if let Some(v) = get_f64(overrides, "diffusion")? {
                cfg.diffusion = v;
            }
            if let Some(v) = get_f64(overrides, "prior_var")? {
                cfg.prior_var = v;
            }
            Ok(Box::new(L96Model::new(cfg)?))
        }
        "lingauss" => {
            reject_unknown(
                overrides,
                &["dim_x", "dim_y", "model_seed", "prior_mean", "prior_cov", "h", "r"],
                name,
            )?;
            let explicit = ["prior_mean", "prior_cov", "h", "r"];
            if explicit.iter().any(|k| overrides.contains_key(*k)) {
                let mean = get_f64_array(overrides, "prior_mean")?
                    .ok_or_else(|| Error::Config("lingauss needs `prior_mean`".into()))?;
                let cov = get_matrix(overrides, "prior_cov")?
                    .ok_or_else(|| Error::Config("lingauss needs `prior_cov`".into()))?;
                let h = get_matrix(overrides, "h")?.ok_or_else(|| Error::Config("lingauss needs `h`".into()))?;
                let r = get_matrix(overrides, "r")?.ok_or_else(|| Error::Config("lingauss needs `r`".into()))?;
                let prior = GaussPair::new(DVector::from_vec(mean), cov)?;
                Ok(Box::new(LinearGaussianModel::new(prior, h, r)?))
            } else if overrides.is_empty() {
                Ok(Box::new(LinearGaussianModel::scalar()))
            } else {
                let dx = get_usize(overrides, "dim_x")?.unwrap_or(1);
                let dy = get_usize(overrides, "dim_y")?.unwrap_or(dx);
                let seed = get_usize(overrides, "model_seed")?.unwrap_or(0) as u64;
                if dx == 0 || dy == 0 {
                    return Err(Error::Config("lingauss dimensions must be positive".into()));
                }
                Ok(Box::new(LinearGaussianModel::random(dx, dy, seed)))
            }
        }
        other => Err(Error::Config(format!(
            "unknown model `{other}` (expected one of {})",
            MODEL_NAMES.join(", ")
        ))),
    }
}
