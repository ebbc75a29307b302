use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde_json::json;

use crate::abc::{run_abc_mcmc, run_abc_smc};
use crate::eki::{run_eki, RunResult, Schedule};
use crate::error::{Error, Result};
use crate::harness::config::{Algorithm, ExperimentConfig};
use crate::harness::metrics::{natural_rmse, to_natural_matrix, write_metrics, MetricsRow};
use crate::models::SimulatorModel;
use crate::rng::{derive_seed, substream, Stream};

/// Ground truth (working space) and observed data for one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub seed: u64,
    /// Root of every stream used by this repetition.
    pub stream_seed: u64,
    pub truth: Vec<f64>,
    pub observed: DVector<f64>,
}

/// Draws the truth (the model's fixed truth, else a prior draw) and one
/// dataset from the likelihood at it.
pub fn make_replicate(model: &dyn SimulatorModel, root_seed: u64, seed: u64) -> Result<Replicate> {
    let stream_seed = derive_seed(root_seed, &[seed]);
    let truth = model
        .fixed_truth()
        .unwrap_or_else(|| model.sample_prior(&mut substream(stream_seed, Stream::Truth, &[])));
    let y = model.simulate(&truth, &mut substream(stream_seed, Stream::Data, &[]))?;
    if y.len() != model.dim_y() {
        return Err(Error::DimensionMismatch {
            what: "observed data",
            expected: model.dim_y(),
            got: y.len(),
        });
    }
    Ok(Replicate {
        seed,
        stream_seed,
        truth,
        observed: DVector::from_vec(y),
    })
}

/// Runs one algorithm on one replicate.
pub fn run_algorithm(
    model: &dyn SimulatorModel,
    algorithm: Algorithm,
    config: &ExperimentConfig,
    n: usize,
    replicate: &Replicate,
) -> Result<RunResult> {
    let seed = derive_seed(replicate.stream_seed, &[Stream::Algorithm as u64, algorithm.tag(), n as u64]);
    let y = &replicate.observed;
    match algorithm {
        Algorithm::EkiSampling => run_eki(model, y, &config.eki_config(n, false), seed),
        Algorithm::EkiOptimisation => run_eki(model, y, &config.eki_config(n, true), seed),
        Algorithm::AbcSmc => run_abc_smc(model, y, &config.abc_smc_config(n), seed),
        Algorithm::AbcMcmc => run_abc_mcmc(model, y, &config.abc_mcmc_config(n), seed),
    }
}

/// Schedule as the JSON array written to `schedule.json`.
pub fn schedule_json(schedule: &Schedule) -> serde_json::Value {
    match schedule {
        Schedule::Temper(t) => json!(t.steps),
        Schedule::Tolerance(t) => json!(t),
    }
}

/// Writes particles (one per column) as CSV rows under a `x1..xd` header.
pub fn write_ensemble_csv(path: &Path, params: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((1..=params.nrows()).map(|k| format!("x{k}")))?;
    for col in params.column_iter() {
        w.write_record(col.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn cell_dir(root: &Path, algorithm: Algorithm, n: usize, seed: u64) -> PathBuf {
    root.join("runs").join(format!("{algorithm}_N{n}_seed{seed}"))
}

fn write_cell(
    dir: &Path,
    model: &dyn SimulatorModel,
    algorithm: Algorithm,
    n: usize,
    replicate: &Replicate,
    outcome: std::result::Result<&RunResult, &str>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut meta = json!({
        "algorithm": algorithm.as_str(),
        "model": model.name(),
        "N": n,
        "seed": replicate.seed,
        "truth": model.to_natural(&replicate.truth),
        "truth_working": replicate.truth,
        "observed": replicate.observed.as_slice(),
    });
    match outcome {
        Ok(res) => {
            write_ensemble_csv(&dir.join("ensemble.csv"), &to_natural_matrix(model, res.ensemble.params()))?;
            fs::write(
                dir.join("schedule.json"),
                serde_json::to_string_pretty(&schedule_json(&res.schedule))?,
            )?;
            if !res.snapshots.is_empty() {
                let snap_dir = dir.join("snapshots");
                fs::create_dir_all(&snap_dir)?;
                for (k, e) in res.snapshots.iter().enumerate() {
                    write_ensemble_csv(&snap_dir.join(format!("iter_{k:04}.csv")), &to_natural_matrix(model, e.params()))?;
                }
            }
            meta["sim_count"] = json!(res.sim_count);
            meta["termination"] = json!(res.termination.as_str());
            meta["acceptance_rate"] = json!(res.acceptance_rate);
        }
        Err(msg) => meta["error"] = json!(msg),
    }
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Runs every (algorithm, N, seed) cell, writes per-cell artifacts under
/// `output_dir/runs/` and `output_dir/metrics.csv`, and returns the rows.
///
/// Cells run in parallel; rows come back in config order (algorithm, then N,
/// then seed). A failing cell yields a `failed: ...` row instead of aborting.
pub fn run_experiment(config: &ExperimentConfig, output_dir: &Path) -> Result<Vec<MetricsRow>> {
    let model = config.validate()?;
    let model = model.as_ref();
    fs::create_dir_all(output_dir)?;

    let replicates: Vec<std::result::Result<Replicate, String>> = config
        .seeds
        .par_iter()
        .map(|&s| make_replicate(model, config.root_seed, s).map_err(|e| e.to_string()))
        .collect();

    let mut cells = Vec::new();
    for alg in config.algorithms() {
        for n in config.sizes() {
            for (k, &seed) in config.seeds.iter().enumerate() {
                cells.push((alg, n, seed, k));
            }
        }
    }

    let rows: Vec<MetricsRow> = cells
        .into_par_iter()
        .map(|(alg, n, seed, k)| {
            let started = Instant::now();
            let outcome = match &replicates[k] {
                Ok(rep) => run_algorithm(model, alg, config, n, rep)
                    .and_then(|res| {
                        let err = natural_rmse(model, res.ensemble.params(), &rep.truth)?;
                        Ok((res, err))
                    })
                    .map_err(|e| e.to_string()),
                Err(msg) => Err(format!("data generation: {msg}")),
            };
            let wall = if config.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            };
            let mut row = MetricsRow {
                algorithm: alg.as_str().into(),
                model: model.name().into(),
                n,
                seed,
                sim_count: 0,
                rmse: f64::NAN,
                wall_time_s: wall,
                termination: String::new(),
                final_temp: f64::NAN,
            };
            match &outcome {
                Ok((res, err)) => {
                    row.sim_count = res.sim_count;
                    row.rmse = *err;
                    row.termination = res.termination.as_str().into();
                    row.final_temp = res.schedule.final_value();
                }
                Err(msg) => row.termination = format!("failed: {msg}"),
            }
            if let Ok(rep) = &replicates[k] {
                let dir = cell_dir(output_dir, alg, n, seed);
                let written = write_cell(&dir, model, alg, n, rep, outcome.as_ref().map(|(r, _)| r).map_err(|m| m.as_str()));
                if let Err(e) = written {
                    row.termination = format!("failed: writing outputs: {e}");
                }
            }
            row
        })
        .collect();

    let file = fs::File::create(output_dir.join("metrics.csv"))?;
    write_metrics(&rows, std::io::BufWriter::new(file))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GkModel, LinearGaussianModel};

    #[test]
    fn gk_replicate_uses_fixed_truth() {
        let m = GkModel::default();
        let r = make_replicate(&m, 0, 4).unwrap();
        let nat = m.to_natural(&r.truth);
        for (a, b) in nat.iter().zip([3.0, 1.0, 2.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(r.observed.len(), 100);
    }

    #[test]
    fn replicates_vary_with_seed() {
        let m = LinearGaussianModel::scalar();
        let a = make_replicate(&m, 0, 1).unwrap();
        let b = make_replicate(&m, 0, 2).unwrap();
        assert_ne!(a.truth, b.truth);
        assert_eq!(a, make_replicate(&m, 0, 1).unwrap());
    }

    #[test]
    fn sweep_writes_rows_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml_str(
            r#"
model = "lingauss"
algorithm = ["eki-sampling", "eki-optimisation", "abc-smc", "abc-mcmc"]
n = [20, 40]
seeds = [0, 1, 2]
record_wall_time = false
snapshots = true
[abc_mcmc]
steps_per_particle = 10
"#,
        )
        .unwrap();
        let rows = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(rows.len(), 4 * 2 * 3);
        assert_eq!(rows[0].algorithm, "eki-sampling");
        assert_eq!((rows[1].n, rows[1].seed), (20, 1));
        for r in rows.iter().filter(|r| r.algorithm == "eki-sampling") {
            assert_eq!(r.final_temp, 1.0);
        }
        assert!(rows.iter().all(|r| !r.failed() && r.sim_count > 0 && r.rmse >= 0.0));
        let cell = dir.path().join("runs/eki-sampling_N20_seed0");
        for f in ["ensemble.csv", "schedule.json", "metadata.json", "snapshots/iter_0000.csv"] {
            assert!(cell.join(f).exists(), "{f}");
        }
        let sched: serde_json::Value = serde_json::from_str(&fs::read_to_string(cell.join("schedule.json")).unwrap()).unwrap();
        let first = &sched[0];
        for key in ["iteration", "lambda", "h", "ess"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        let ens = fs::read_to_string(cell.join("ensemble.csv")).unwrap();
        assert_eq!(ens.lines().next().unwrap(), "x1");
        assert_eq!(ens.lines().count(), 21);
    }
}
