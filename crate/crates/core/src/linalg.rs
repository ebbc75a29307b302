//! Small dense linear-algebra helpers shared by the samplers.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal jitter applied when a Cholesky factorization fails.
///
/// Jitter is `level * trace(C) / d`, starting at `initial` and multiplied by
/// `factor` until it exceeds `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterPolicy {
    pub initial: f64,
    pub max: f64,
    pub factor: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-10,
            max: 1e-4,
            factor: 10.0,
        }
    }
}

impl JitterPolicy {
    /// A policy that never adds jitter.
    pub fn none() -> Self {
        Self {
            initial: 0.0,
            max: 0.0,
            factor: 10.0,
        }
    }
}

/// Replaces `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// A Cholesky factor together with the diagonal jitter that made it succeed.
#[derive(Debug)]
pub struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

/// Cholesky factorization of a symmetric matrix with the jitter escalation policy.
///
/// The input is symmetrized before factorizing. A zero-trace matrix uses a unit
/// jitter scale so the escalation still has an effect.
pub fn cholesky_jittered(m: &DMatrix<f64>, policy: &JitterPolicy, what: &'static str) -> Result<Factor> {
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::DimensionMismatch {
            what,
            expected: d,
            got: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    if let Some(chol) = Cholesky::new(sym.clone()) {
        return Ok(Factor { chol, jitter: 0.0 });
    }
    let trace = sym.trace();
    let scale = if trace > 0.0 && d > 0 { trace / d as f64 } else { 1.0 };
    let mut level = policy.initial;
    let mut last = 0.0;
    while level > 0.0 && level <= policy.max * (1.0 + 1e-12) {
        let jitter = level * scale;
        let mut jittered = sym.clone();
        for i in 0..d {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(Factor { chol, jitter });
        }
        last = jitter;
        level *= policy.factor;
    }
    Err(Error::NotFactorizable {
        what,
        max_jitter: last,
    })
}

/// Solves `A X = B` for symmetric positive (semi-)definite `A`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, policy: &JitterPolicy, what: &'static str) -> Result<DMatrix<f64>> {
    let f = cholesky_jittered(a, policy, what)?;
    Ok(f.chol.solve(b))
}
