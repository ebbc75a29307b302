//! Probit transform between a bounded box `(0, upper)` and the real line.

use crate::error::{Error, Result};
use crate::models::normal;

/// Maps `(0, upper)` to `ℝ` with `z(x / upper)`, `z` the standard normal quantile.
///
/// Under this map a uniform prior on `(0, upper)` becomes a standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbitBox {
    pub upper: f64,
}

impl Default for ProbitBox {
    fn default() -> Self {
        Self { upper: 10.0 }
    }
}

impl ProbitBox {
    pub fn to_unconstrained(&self, x: &[f64]) -> Result<Vec<f64>> {
        x.iter()
            .map(|&v| {
                if v > 0.0 && v < self.upper {
                    Ok(normal::quantile(v / self.upper))
                } else {
                    Err(Error::InvalidArgument(format!(
                        "{v} outside the open interval (0, {})",
                        self.upper
                    )))
                }
            })
            .collect()
    }

    pub fn to_constrained(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&v| self.upper * normal::cdf(v)).collect()
    }
}

/// `Φ⁻¹(x / 10)` componentwise.
pub fn transform_to_unconstrained(x: &[f64]) -> Result<Vec<f64>> {
    ProbitBox::default().to_unconstrained(x)
}

/// `10 Φ(z)` componentwise.
pub fn inverse_transform(z: &[f64]) -> Vec<f64> {
    ProbitBox::default().to_constrained(z)
}
