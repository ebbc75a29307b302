//! The g-and-k distribution and its order-statistic summaries.

use rand::{Rng, RngCore};
use rand_distr::Open01;

use crate::error::{Error, Result};
use crate::models::normal;
use crate::models::transform::ProbitBox;
use crate::models::SimulatorModel;

/// Parameters of the g-and-k quantile function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkParams {
    pub a: f64,
    pub b: f64,
    pub g: f64,
    pub k: f64,
    pub c: f64,
}

impl GkParams {
    pub const DEFAULT_C: f64 = 0.8;

    pub fn new(a: f64, b: f64, g: f64, k: f64) -> Self {
        Self {
            a,
            b,
            g,
            k,
            c: Self::DEFAULT_C,
        }
    }

    pub fn from_slice(x: &[f64], c: f64) -> Self {
        Self {
            a: x[0],
            b: x[1],
            g: x[2],
            k: x[3],
            c,
        }
    }
}

/// `F⁻¹(u) = A + B (1 + c tanh(g z / 2)) (1 + z²)^k z`, `z = Φ⁻¹(u)`.
///
/// `(1 − e^{−gz}) / (1 + e^{−gz})` is evaluated as `tanh(gz/2)`, which is the
/// same quantity without overflow for large `|gz|`.
pub fn gk_quantile(u: f64, p: &GkParams) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "g-and-k quantile needs u in (0, 1), got {u}"
        )));
    }
    let z = normal::quantile(u);
    Ok(quantile_at_z(z, p))
}

fn quantile_at_z(z: f64, p: &GkParams) -> f64 {
    if z == 0.0 {
        return p.a;
    }
    let skew = 1.0 + p.c * (0.5 * p.g * z).tanh();
    p.a + p.b * skew * (1.0 + z * z).powf(p.k) * z
}

/// Draws `n_raw` g-and-k samples and returns `n_stats` evenly spaced order statistics.
///
/// The returned values are the sorted samples at 1-based ranks
/// `⌊(j+1) n_raw / n_stats⌋`, `j = 0..n_stats`; for 1000 draws and 100
/// statistics that is every 10th value, ending with the maximum.
pub fn gk_simulate_summaries(
    params: &GkParams,
    n_raw: usize,
    n_stats: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    if n_stats == 0 || n_stats > n_raw {
        return Err(Error::InvalidArgument(format!(
            "need 0 < n_stats <= n_raw, got {n_stats} and {n_raw}"
        )));
    }
    let mut raw: Vec<f64> = (0..n_raw)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            quantile_at_z(normal::quantile(u), params)
        })
        .collect();
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Simulation(format!("non-finite g-and-k draw at {params:?}")));
    }
    raw.sort_by(f64::total_cmp);
    Ok(order_statistic_ranks(n_raw, n_stats)
        .map(|r| raw[r - 1])
        .collect())
}

pub(crate) fn order_statistic_ranks(n_raw: usize, n_stats: usize) -> impl Iterator<Item = usize> {
    (0..n_stats).map(move |j| (j + 1) * n_raw / n_stats)
}

/// g-and-k model on the unconstrained image of a `U(0, 10)⁴` prior.
#[derive(Debug, Clone)]
pub struct GkModel {
    pub n_raw: usize,
    pub n_stats: usize,
    pub c: f64,
    pub transform: ProbitBox,
    /// Natural-space truth used when generating observations.
    pub truth: [f64; 4],
}

impl Default for GkModel {
    fn default() -> Self {
        Self {
            n_raw: 1000,
            n_stats: 100,
            c: GkParams::DEFAULT_C,
            transform: ProbitBox::default(),
            truth: [3.0, 1.0, 2.0, 0.5],
        }
    }
}

impl SimulatorModel for GkModel {
    fn name(&self) -> &str {
        "gk"
    }

    fn dim_x(&self) -> usize {
        4
    }

    fn dim_y(&self) -> usize {
        self.n_stats
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        // U(0, upper) pushed through the probit map is N(0, 1).
        (0..4)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect()
    }

    fn log_prior(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| normal::ln_pdf(v)).sum()
    }

    fn simulate(&self, x: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let natural = self.transform.to_constrained(x);
        gk_simulate_summaries(&GkParams::from_slice(&natural, self.c), self.n_raw, self.n_stats, rng)
    }

    fn to_natural(&self, x: &[f64]) -> Vec<f64> {
        self.transform.to_constrained(x)
    }

    fn fixed_truth(&self) -> Option<Vec<f64>> {
        self.transform.to_unconstrained(&self.truth).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    #[test]
    fn median_is_location() {
        let p = GkParams::new(1.7, 2.0, -3.0, 4.0);
        assert_eq!(gk_quantile(0.5, &p).unwrap(), 1.7);
    }

    #[test]
    fn gaussian_reduction() {
        let p = GkParams::new(2.0, 3.0, 0.0, 0.0);
        for u in [0.01, 0.3, 0.77, 0.999] {
            let expected = 2.0 + 3.0 * normal::quantile(u);
            assert!((gk_quantile(u, &p).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_high_precision_values() {
        // 40-digit evaluation of the exp form at the benchmark truth.
        let p = GkParams::new(3.0, 1.0, 2.0, 0.5);
        assert!((gk_quantile(0.9, &p).unwrap() - 6.511_290_090_395_887).abs() < 1e-9);
        assert!((gk_quantile(0.1, &p).unwrap() - 2.344_868_059_593_67).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range_u() {
        let p = GkParams::new(3.0, 1.0, 2.0, 0.5);
        for u in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(gk_quantile(u, &p).is_err());
        }
    }

    #[test]
    fn monotone_in_u() {
        for p in [
            GkParams::new(3.0, 1.0, 2.0, 0.5),
            GkParams::new(0.0, 0.1, -5.0, 3.0),
            GkParams::new(1.0, 5.0, 9.0, -0.4),
        ] {
            let vals: Vec<f64> = (1..1000)
                .map(|i| gk_quantile(i as f64 / 1000.0, &p).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[0] < w[1]), "{p:?}");
        }
    }

    #[test]
    fn ranks_are_every_tenth() {
        let r: Vec<usize> = order_statistic_ranks(1000, 100).collect();
        assert_eq!(r.len(), 100);
        assert_eq!(r[0], 10);
        assert_eq!(r[1], 20);
        assert_eq!(r[99], 1000);
    }

    #[test]
    fn zero_scale_gives_constant_summaries() {
        let p = GkParams::new(3.0, 0.0, 2.0, 0.5);
        let s = gk_simulate_summaries(&p, 1000, 100, &mut substream(0, Stream::Simulate, &[])).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn summaries_sorted() {
        let p = GkParams::new(3.0, 1.0, 2.0, 0.5);
        for seed in 0..5 {
            let s = gk_simulate_summaries(&p, 1000, 100, &mut substream(seed, Stream::Simulate, &[])).unwrap();
            assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn empirical_median_near_location() {
        // The 50th statistic (rank 500) estimates the median A = 3.
        let p = GkParams::new(3.0, 1.0, 2.0, 0.5);
        for seed in 0..20 {
            let s = gk_simulate_summaries(&p, 1000, 100, &mut substream(seed, Stream::Simulate, &[])).unwrap();
            assert!((s[49] - 3.0).abs() < 0.15, "seed {seed}: {}", s[49]);
        }
    }

    #[test]
    fn model_truth_round_trips() {
        let m = GkModel::default();
        let t = m.fixed_truth().unwrap();
        let back = m.to_natural(&t);
        for (a, b) in back.iter().zip([3.0, 1.0, 2.0, 0.5]) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
