//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! per criterion and exits non-zero if any failed.

use std::time::Instant;

use ekigl::abc::{run_abc_mcmc, run_abc_smc, AbcMcmcConfig, AbcSmcConfig};
use ekigl::eki::{
    eki_step, enkf_update, gaussian::forward_matrix, gaussian_eki_step, run_eki, run_gaussian_eki, EkiConfig,
    RunResult, TemperSchedule, Termination,
};
use ekigl::harness::{make_replicate, run_algorithm, Algorithm, ExperimentConfig};
use ekigl::linalg::JitterPolicy;
use ekigl::models::gk::{gk_quantile, GkParams};
use ekigl::models::l96::l96_drift;
use ekigl::models::lingauss::{linear_gaussian_posterior, linear_gaussian_tempered, tempered_recursion_step};
use ekigl::models::{normal, sample_prior_matrix, simulate_matrix, GkModel, L96Config, L96Model, LinearGaussianModel, SimulatorModel};
use ekigl::rng::{substream, Stream};
use ekigl::{compute_moments, ess, Ensemble, Result};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

// Tolerances.
const EXACT_TOL: f64 = 1e-10;
const UNBIASED_SE: f64 = 5.0;
const COV_REL_TOL: f64 = 0.10;
const EQUIV_SE: f64 = 3.0;
const ESS_TOL_FRAC: f64 = 1e-2;
const RHO: f64 = 0.5;
const UPSILON: f64 = 1e-2;
const GK_A_TOL: f64 = 0.3;
const GK_K_TOL: f64 = 0.2;
const ABC_ACCEPT_TARGET: f64 = 0.10;
const ABC_ACCEPT_TOL: f64 = 0.03;
const ABC_STOP_ACCEPT: f64 = 0.015;
const ORACLE_SE: f64 = 3.0;
const PROPERTY_SECONDS: f64 = 30.0;

type Outcome = std::result::Result<String, String>;

/// Every EKI schedule produced by the suite, with its ensemble size.
#[derive(Default)]
struct Collected {
    schedules: Vec<(usize, TemperSchedule)>,
    smc_gk: Vec<RunResult>,
}

impl Collected {
    fn keep(&mut self, n: usize, res: &RunResult) {
        if let Some(t) = res.schedule.as_temper() {
            self.schedules.push((n, t.clone()));
        }
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

fn observe(model: &dyn SimulatorModel, seed: u64) -> (Vec<f64>, DVector<f64>) {
    let truth = model.sample_prior(&mut substream(seed, Stream::Truth, &[]));
    let y = model.simulate(&truth, &mut substream(seed, Stream::Data, &[])).unwrap();
    (truth, DVector::from_vec(y))
}

// 1. Tempered recursion over random partitions equals the direct tempered form
//    and, at λ = 1, the closed-form posterior.
fn linear_gaussian_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in 0..20u64 {
        let mut rng = substream(m, Stream::Algorithm, &[]);
        let dx = rng.random_range(1..=5);
        let dy = rng.random_range(1..=5);
        let model = LinearGaussianModel::random(dx, dy, 1000 + m);
        let (_, y) = observe(&model, m);
        let cuts = rng.random_range(1..=8);
        let mut points: Vec<f64> = (0..cuts).map(|_| rng.random::<f64>()).collect();
        points.push(1.0);
        points.sort_by(f64::total_cmp);
        points.dedup();
        let mut current = model.prior.clone();
        let mut prev = 0.0;
        for &lam in &points {
            current = tempered_recursion_step(&current, &model.h, &model.r, &y, lam - prev).map_err(|e| e.to_string())?;
            prev = lam;
            let direct = linear_gaussian_tempered(&model.prior, &model.h, &model.r, &y, lam).map_err(|e| e.to_string())?;
            worst = worst
                .max((&current.mean - &direct.mean).amax())
                .max(max_abs_diff(&current.cov, &direct.cov));
        }
        let post = linear_gaussian_posterior(&model.prior, &model.h, &model.r, &y).map_err(|e| e.to_string())?;
        worst = worst
            .max((&current.mean - &post.mean).amax())
            .max(max_abs_diff(&current.cov, &post.cov));
    }
    check(worst < EXACT_TOL, format!("20 random models, max abs deviation {worst:.2e} (tol {EXACT_TOL:.0e})"))
}

// 2. EKI in sampling mode is asymptotically unbiased for linear-Gaussian models.
fn eki_unbiasedness(col: &mut Collected) -> Outcome {
    let model = LinearGaussianModel::random(3, 3, 77);
    let (_, y) = observe(&model, 77);
    let post = model.posterior(&y).unwrap();
    let sizes = [100usize, 1_000, 10_000];
    let seeds = 20u64;
    let mut medians = Vec::new();
    let mut means_big: Vec<DVector<f64>> = Vec::new();
    let mut covs_big: Vec<DMatrix<f64>> = Vec::new();
    for &n in &sizes {
        let mut errs = Vec::new();
        for s in 0..seeds {
            let res = run_eki(&model, &y, &EkiConfig::sampling(n), 10_000 + s).map_err(|e| e.to_string())?;
            col.keep(n, &res);
            let m = res.ensemble.mean();
            errs.push((&m - &post.mean).norm());
            if n == 10_000 {
                means_big.push(m);
                covs_big.push(res.ensemble.cov());
            }
        }
        medians.push(median(errs));
    }
    let monotone = medians.windows(2).all(|w| w[1] < w[0]);

    let d = post.mean.len();
    let mut worst_z: f64 = 0.0;
    for k in 0..d {
        let vals: Vec<f64> = means_big.iter().map(|m| m[k]).collect();
        let (_, se) = mean_sd(&vals);
        for v in &vals {
            worst_z = worst_z.max((v - post.mean[k]).abs() / se);
        }
    }
    let mut worst_rel: f64 = 0.0;
    for c in &covs_big {
        for i in 0..d {
            for j in 0..d {
                let scale = (post.cov[(i, i)] * post.cov[(j, j)]).sqrt();
                worst_rel = worst_rel.max((c[(i, j)] - post.cov[(i, j)]).abs() / scale);
            }
        }
    }
    check(
        monotone && worst_z < UNBIASED_SE && worst_rel < COV_REL_TOL,
        format!(
            "median |mean err| over N=1e2,1e3,1e4: {:.4} > {:.4} > {:.4} ({}); N=1e4 worst |z| {worst_z:.2} (< {UNBIASED_SE}), worst cov rel err {:.1}% (< {:.0}%)",
            medians[0],
            medians[1],
            medians[2],
            if monotone { "monotone" } else { "NOT monotone" },
            worst_rel * 100.0,
            COV_REL_TOL * 100.0
        ),
    )
}

// 3. The Gaussian iterate at h = 1 is the EnKF, and the general and Gaussian
//    drivers agree on linear models.
fn special_case_equivalence(col: &mut Collected) -> Outcome {
    let bits = |m: &DMatrix<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let mut identical = true;
    for s in 0..5u64 {
        let model = LinearGaussianModel::random(3, 2, 300 + s);
        let (_, y) = observe(&model, s);
        let e = Ensemble::new(sample_prior_matrix(&model, 500, s)).unwrap();
        let f = forward_matrix(&model, e.params());
        let a = gaussian_eki_step(&e, &f, &y, &model.r, 1.0, &JitterPolicy::default(), s).unwrap();
        let b = enkf_update(&e, &f, &y, &model.r, &JitterPolicy::default(), s).unwrap();
        identical &= bits(a.params()) == bits(b.params());
    }

    let model = LinearGaussianModel::random(2, 2, 42);
    let (_, y) = observe(&model, 42);
    let n = 10_000;
    let seeds = 10u64;
    let mut general = Vec::new();
    let mut gauss = Vec::new();
    for s in 0..seeds {
        let a = run_eki(&model, &y, &EkiConfig::sampling(n), 500 + s).map_err(|e| e.to_string())?;
        let b = run_gaussian_eki(&model, &y, &EkiConfig::sampling(n), 500 + s).map_err(|e| e.to_string())?;
        col.keep(n, &a);
        col.keep(n, &b);
        general.push(a.ensemble.mean());
        gauss.push(b.ensemble.mean());
    }
    let mut worst_z: f64 = 0.0;
    for k in 0..2 {
        let (ma, sa) = mean_sd(&general.iter().map(|m| m[k]).collect::<Vec<_>>());
        let (mb, sb) = mean_sd(&gauss.iter().map(|m| m[k]).collect::<Vec<_>>());
        let se = ((sa * sa + sb * sb) / seeds as f64).sqrt();
        worst_z = worst_z.max((ma - mb).abs() / se);
    }
    check(
        identical && worst_z < EQUIV_SE,
        format!(
            "h=1 step vs EnKF byte-identical on 5 models: {identical}; general vs Gaussian driver at N=1e4 worst |z| {worst_z:.2} (< {EQUIV_SE})"
        ),
    )
}

// 5. g-and-k optimisation converges to the truth.
fn gk_optimisation(col: &mut Collected) -> Outcome {
    let model = GkModel::default();
    let n = 500;
    let cfg = ExperimentConfig::from_toml_str("model = \"gk\"\nalgorithm = \"eki-optimisation\"\nn = 500\nseeds = [0]\n").unwrap();
    let mut err_a = Vec::new();
    let mut err_k = Vec::new();
    let mut all_collapsed = true;
    for s in 0..10u64 {
        let rep = make_replicate(&model, 5, s).map_err(|e| e.to_string())?;
        let res = run_algorithm(&model, Algorithm::EkiOptimisation, &cfg, n, &rep).map_err(|e| e.to_string())?;
        col.keep(n, &res);
        // The driver draws its prior ensemble from the same seed; rebuild it independently.
        let alg_seed = ekigl::rng::derive_seed(rep.stream_seed, &[Stream::Algorithm as u64, 1, n as u64]);
        let init = Ensemble::new(sample_prior_matrix(&model, n, alg_seed)).unwrap().cov();
        let fin = res.ensemble.cov();
        all_collapsed &= res.termination == Termination::Optimisation
            && (0..4).all(|k| fin[(k, k)] < UPSILON * init[(k, k)]);
        let mean = model.to_natural(res.ensemble.mean().as_slice());
        err_a.push((mean[0] - 3.0).abs());
        err_k.push((mean[3] - 0.5).abs());
    }
    let (ma, mk) = (median(err_a), median(err_k));
    check(
        all_collapsed && ma < GK_A_TOL && mk < GK_K_TOL,
        format!(
            "10 seeds: all variances < {UPSILON} x initial: {all_collapsed}; median |A err| {ma:.3} (< {GK_A_TOL}), median |k err| {mk:.3} (< {GK_K_TOL})"
        ),
    )
}

// 6. Both EKI modes beat both ABC baselines on g-and-k at no greater cost.
fn comparative_rmse(col: &mut Collected) -> Outcome {
    let model = GkModel::default();
    let n = 500;
    let cfg = ExperimentConfig::from_toml_str(
        "model = \"gk\"\nalgorithm = [\"eki-sampling\", \"eki-optimisation\", \"abc-smc\", \"abc-mcmc\"]\nn = 500\nseeds = [0, 1, 2, 3, 4]\n",
    )
    .unwrap();
    let mut rmse = std::collections::BTreeMap::new();
    let mut sims = std::collections::BTreeMap::new();
    for s in 0..5u64 {
        let rep = make_replicate(&model, 6, s).map_err(|e| e.to_string())?;
        for alg in Algorithm::ALL {
            let res = run_algorithm(&model, alg, &cfg, n, &rep).map_err(|e| format!("{alg}: {e}"))?;
            col.keep(n, &res);
            let err = ekigl::harness::natural_rmse(&model, res.ensemble.params(), &rep.truth).unwrap();
            rmse.entry(alg).or_insert_with(Vec::new).push(err);
            sims.entry(alg).or_insert_with(Vec::new).push(res.sim_count as f64);
            if alg == Algorithm::AbcSmc {
                col.smc_gk.push(res);
            }
        }
    }
    let med = |m: &std::collections::BTreeMap<Algorithm, Vec<f64>>, a| median(m[&a].clone());
    let mut ok = true;
    for eki in [Algorithm::EkiSampling, Algorithm::EkiOptimisation] {
        for abc in [Algorithm::AbcSmc, Algorithm::AbcMcmc] {
            ok &= med(&rmse, eki) < med(&rmse, abc) && med(&sims, eki) <= med(&sims, abc);
        }
    }
    let detail = Algorithm::ALL
        .iter()
        .map(|&a| format!("{a} rmse {:.3} sims {:.0}", med(&rmse, a), med(&sims, a)))
        .collect::<Vec<_>>()
        .join("; ");
    check(ok, format!("medians over 5 seeds, N=500: {detail}"))
}

// 7. Lorenz 96: observed coordinates are better determined than unobserved ones.
fn lorenz96(col: &mut Collected) -> Outcome {
    let config = L96Config {
        obs_times: vec![1.0, 2.0],
        ..L96Config::with_dim(8)
    };
    let observed_dims = config.observed_dims.clone();
    let model = L96Model::new(config).unwrap();
    let n = 200;
    let mut per_seed = Vec::new();
    let mut ok = true;
    for s in 0..3u64 {
        let rep = make_replicate(&model, 7, s).map_err(|e| e.to_string())?;
        let res = run_eki(&model, &rep.observed, &EkiConfig::sampling(n), 700 + s).map_err(|e| e.to_string())?;
        col.keep(n, &res);
        let cov = res.ensemble.cov();
        let (mut obs, mut unobs) = (Vec::new(), Vec::new());
        for k in 0..8 {
            let sd = cov[(k, k)].sqrt();
            if observed_dims.contains(&k) {
                obs.push(sd);
            } else {
                unobs.push(sd);
            }
        }
        let (mo, mu) = (mean_sd(&obs).0, mean_sd(&unobs).0);
        ok &= mo < mu;
        per_seed.push(format!("{mo:.3} vs {mu:.3}"));
    }

    let big = L96Model::new(L96Config::default()).unwrap();
    let rep = make_replicate(&big, 7, 0).map_err(|e| e.to_string())?;
    // Ensembles no larger than d_y = 100 leave the data covariance rank-deficient.
    let smoke = run_eki(&big, &rep.observed, &EkiConfig::sampling(200), 7).map_err(|e| format!("40-dim smoke: {e}"))?;
    col.keep(200, &smoke);
    let smoke_ok = smoke.termination == Termination::Sampling && smoke.ensemble.params().iter().all(|v| v.is_finite());
    check(
        ok && smoke_ok,
        format!(
            "d_x=8, N=200, mean sd observed vs unobserved per seed: {}; 40-dim smoke run at N=200: {}",
            per_seed.join(", "),
            if smoke_ok { "ok" } else { "failed" }
        ),
    )
}

// 4. Every non-clamped temperature hits the ESS target.
fn ess_contract(col: &Collected) -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut clamped = 0;
    for (n, sched) in &col.schedules {
        for step in &sched.steps {
            if step.clamped {
                clamped += 1;
                continue;
            }
            checked += 1;
            worst = worst.max((step.ess - RHO * *n as f64).abs() / *n as f64);
        }
    }
    check(
        checked > 0 && worst <= ESS_TOL_FRAC,
        format!(
            "{} runs, {checked} searched steps ({clamped} clamped): worst |ESS - N/2| = {:.2e} N (tol {ESS_TOL_FRAC:.0e} N)",
            col.schedules.len(),
            worst
        ),
    )
}

/// `x ~ U(0, 10)` through the probit map, `y = x + N(0, 1)`.
struct UniformToy;

impl SimulatorModel for UniformToy {
    fn name(&self) -> &str {
        "uniform-toy"
    }
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![StandardNormal.sample(rng)]
    }
    fn log_prior(&self, z: &[f64]) -> f64 {
        normal::ln_pdf(z[0])
    }
    fn simulate(&self, z: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let e: f64 = StandardNormal.sample(rng);
        Ok(vec![10.0 * normal::cdf(z[0]) + e])
    }
    fn to_natural(&self, z: &[f64]) -> Vec<f64> {
        vec![10.0 * normal::cdf(z[0])]
    }
}

/// Rejection-ABC posterior mean of `x` and its standard error at tolerance `kappa`.
fn rejection_oracle(y_obs: f64, kappa: f64, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = substream(seed, Stream::Algorithm, &[]);
    let mut acc = Vec::new();
    for _ in 0..draws {
        let x = 10.0 * rng.random::<f64>();
        let e: f64 = StandardNormal.sample(&mut rng);
        if (x + e - y_obs).abs() < kappa {
            acc.push(x);
        }
    }
    let (m, sd) = mean_sd(&acc);
    (m, sd / (acc.len() as f64).sqrt())
}

// 8. ABC baselines: acceptance targeting, tolerance schedule and agreement with rejection ABC.
fn abc_self_consistency(col: &Collected) -> Outcome {
    // ABC-MCMC acceptance on g-and-k.
    let gk = GkModel::default();
    let mut rates = Vec::new();
    for s in 0..2u64 {
        let rep = make_replicate(&gk, 8, s).map_err(|e| e.to_string())?;
        let res = run_abc_mcmc(&gk, &rep.observed, &AbcMcmcConfig::new(20_000), 800 + s).map_err(|e| e.to_string())?;
        rates.push(res.acceptance_rate.unwrap());
    }
    let rate_ok = rates.iter().all(|r| (r - ABC_ACCEPT_TARGET).abs() <= ABC_ACCEPT_TOL);

    // ABC-SMC schedule on g-and-k (runs from criterion 6).
    let smc_ok = !col.smc_gk.is_empty()
        && col.smc_gk.iter().all(|r| {
            let steps = r.schedule.as_tolerance().unwrap();
            r.termination == Termination::Acceptance
                && steps.windows(2).all(|w| w[1].kappa < w[0].kappa)
                && steps.last().unwrap().acceptance_rate < ABC_STOP_ACCEPT
                && steps[..steps.len() - 1].iter().all(|s| s.acceptance_rate >= ABC_STOP_ACCEPT)
        });

    // Rejection-ABC oracle on a one-dimensional toy.
    let y_obs = 3.4;
    let y = DVector::from_element(1, y_obs);
    let seeds = 10u64;
    let mut smc_diff = Vec::new();
    let mut smc_oracle_se: f64 = 0.0;
    let mut mcmc_diff = Vec::new();
    let mut mcmc_oracle_se: f64 = 0.0;
    for s in 0..seeds {
        let smc = run_abc_smc(&UniformToy, &y, &AbcSmcConfig::new(1000), 900 + s).map_err(|e| e.to_string())?;
        let kappa = smc.schedule.final_value();
        let (om, ose) = rejection_oracle(y_obs, kappa, 4_000_000, 2 * s);
        let xs: Vec<f64> = smc.ensemble.particles().map(|p| UniformToy.to_natural(p)[0]).collect();
        smc_diff.push(mean_sd(&xs).0 - om);
        smc_oracle_se = smc_oracle_se.max(ose);

        let mcmc = run_abc_mcmc(&UniformToy, &y, &AbcMcmcConfig::new(20_000), 950 + s).map_err(|e| e.to_string())?;
        let kappa = mcmc.schedule.final_value();
        let (om, ose) = rejection_oracle(y_obs, kappa, 4_000_000, 2 * s + 1);
        let xs: Vec<f64> = mcmc.ensemble.particles().map(|p| UniformToy.to_natural(p)[0]).collect();
        mcmc_diff.push(mean_sd(&xs).0 - om);
        mcmc_oracle_se = mcmc_oracle_se.max(ose);
    }
    let z = |d: &[f64], ose: f64| {
        let (m, sd) = mean_sd(d);
        m.abs() / (sd * sd / d.len() as f64 + ose * ose).sqrt()
    };
    let (z_smc, z_mcmc) = (z(&smc_diff, smc_oracle_se), z(&mcmc_diff, mcmc_oracle_se));
    check(
        rate_ok && smc_ok && z_smc < ORACLE_SE && z_mcmc < ORACLE_SE,
        format!(
            "ABC-MCMC g-and-k acceptance {} (target {ABC_ACCEPT_TARGET} +/- {ABC_ACCEPT_TOL}); ABC-SMC g-and-k tolerances decreasing and stop below {ABC_STOP_ACCEPT}: {smc_ok}; rejection-oracle |z| SMC {z_smc:.2}, MCMC {z_mcmc:.2} (< {ORACLE_SE})",
            rates.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn timed_property<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> std::result::Result<(), TestCaseError>,
) -> std::result::Result<String, String> {
    let started = Instant::now();
    let mut runner = TestRunner::new(PropConfig {
        cases,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let result = runner.run(&strategy, test);
    let secs = started.elapsed().as_secs_f64();
    match result {
        Ok(()) if secs < PROPERTY_SECONDS => Ok(format!("{name} {secs:.1}s")),
        Ok(()) => Err(format!("{name} took {secs:.1}s")),
        Err(e) => Err(format!("{name}: {e}")),
    }
}

// 9. Property suites.
fn property_suites() -> Outcome {
    let mut results = Vec::new();

    results.push(timed_property(
        "permutation invariance",
        64,
        (2usize..40, any::<u64>()),
        |(n, seed)| {
            let model = LinearGaussianModel::random(2, 3, seed % 50);
            let x = sample_prior_matrix(&model, n, seed);
            let y = simulate_matrix(&model, &x, seed, 0).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.rotate_left((seed as usize) % n);
            perm.reverse();
            let xp = DMatrix::from_fn(2, n, |r, c| x[(r, perm[c])]);
            let yp = DMatrix::from_fn(3, n, |r, c| y[(r, perm[c])]);
            let a = compute_moments(&Ensemble::new(x).unwrap().with_sims(y).unwrap(), &JitterPolicy::default()).unwrap();
            let b = compute_moments(&Ensemble::new(xp).unwrap().with_sims(yp).unwrap(), &JitterPolicy::default()).unwrap();
            prop_assert!((&a.cov_xy - &b.cov_xy).amax() < 1e-12);
            prop_assert!((&a.cov_yy - &b.cov_yy).amax() < 1e-12);
            prop_assert!((&a.mean_x - &b.mean_x).amax() < 1e-12);
            Ok(())
        },
    ));

    results.push(timed_property(
        "ESS bounds",
        256,
        prop::collection::vec(0.0..1e3f64, 1..200),
        |mut w| {
            w[0] += 1e-3;
            let e = ess(&w).unwrap();
            prop_assert!(e >= 1.0 - 1e-9 && e <= w.len() as f64 + 1e-9);
            let scaled: Vec<f64> = w.iter().map(|v| v * 7.5).collect();
            prop_assert!((ess(&scaled).unwrap() - e).abs() < 1e-9 * e);
            Ok(())
        },
    ));

    results.push(timed_property(
        "h=1 zero-noise degeneracy",
        32,
        (5usize..60, any::<u64>(), any::<u64>()),
        |(n, s1, s2)| {
            let model = LinearGaussianModel::random(2, 2, s1 % 20);
            let x = sample_prior_matrix(&model, n, s1);
            let y = simulate_matrix(&model, &x, s1, 0).unwrap();
            let e = Ensemble::new(x).unwrap().with_sims(y).unwrap();
            let m = compute_moments(&e, &JitterPolicy::default()).unwrap();
            let obs = DVector::from_vec(vec![0.3, -0.2]);
            let a = eki_step(&e, &obs, 1.0, &m, &JitterPolicy::default(), s1).unwrap();
            let b = eki_step(&e, &obs, 1.0, &m, &JitterPolicy::default(), s2).unwrap();
            prop_assert_eq!(a.params(), b.params());
            Ok(())
        },
    ));

    results.push(timed_property(
        "cyclic equivariance of the L96 drift",
        256,
        (prop::collection::vec(-10.0..10.0f64, 4..40), 0usize..40, -10.0..10.0f64),
        |(x, shift, f)| {
            let d = x.len();
            let s = shift % d;
            let mut rolled = x.clone();
            rolled.rotate_left(s);
            let mut expect = l96_drift(&x, f);
            expect.rotate_left(s);
            let got = l96_drift(&rolled, f);
            for (a, b) in got.iter().zip(&expect) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            Ok(())
        },
    ));

    results.push(timed_property(
        "g-and-k quantile monotonicity",
        256,
        (0.0..10.0f64, 0.01..10.0f64, 0.0..10.0f64, 0.0..10.0f64, 0.001..0.998f64),
        |(a, b, g, k, u)| {
            let p = GkParams::new(a, b, g, k);
            let lo = gk_quantile(u, &p).unwrap();
            let hi = gk_quantile(u + 0.001, &p).unwrap();
            prop_assert!(hi > lo, "Q({u}) = {lo} >= Q({}) = {hi}", u + 0.001);
            Ok(())
        },
    ));

    results.push(timed_property(
        "seed determinism under parallelism",
        6,
        (any::<u64>(), 2usize..5),
        |(seed, threads)| {
            let model = GkModel::default();
            let rep = make_replicate(&model, 0, seed).unwrap();
            let run = |t: usize| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .unwrap()
                    .install(|| run_eki(&model, &rep.observed, &EkiConfig::sampling(60), seed).unwrap())
            };
            let (a, b) = (run(1), run(threads));
            prop_assert_eq!(a.ensemble, b.ensemble);
            prop_assert_eq!(a.sim_count, b.sim_count);
            Ok(())
        },
    ));

    let failed: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let passed: Vec<&String> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    if failed.is_empty() {
        Ok(passed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "))
    } else {
        Err(failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; "))
    }
}

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes "acceptance" skips the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }

    let mut col = Collected::default();
    let mut outcomes: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &mut dyn FnMut(&mut Collected) -> Outcome| {
        let started = Instant::now();
        let outcome = f(&mut col);
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {id} [{tag}] {name} ({secs:.1}s): {detail}");
        outcomes.push((id, name, outcome, secs));
    };

    run(1, "linear-Gaussian exactness", &mut |_| linear_gaussian_exactness());
    run(2, "EKI asymptotic unbiasedness", &mut eki_unbiasedness);
    run(3, "special-case equivalence", &mut special_case_equivalence);
    run(5, "g-and-k optimisation", &mut gk_optimisation);
    run(6, "comparative RMSE", &mut comparative_rmse);
    run(7, "Lorenz 96 desk-scale check", &mut lorenz96);
    run(4, "adaptive tempering ESS contract", &mut |c| ess_contract(c));
    run(8, "ABC baseline self-consistency", &mut |c| abc_self_consistency(c));
    run(9, "property suites", &mut |_| property_suites());

    let failed: Vec<u32> = outcomes.iter().filter(|o| o.2.is_err()).map(|o| o.0).collect();
    println!(
        "acceptance: {} passed, {} failed",
        outcomes.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
