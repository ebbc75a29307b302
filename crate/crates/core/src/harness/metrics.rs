use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::SimulatorModel;

/// Header of the metrics CSV.
pub const METRICS_HEADER: &str = "algorithm,model,N,seed,sim_count,rmse,wall_time_s,termination,final_temp";

/// `sqrt(mean over particles and coordinates of (xᵢₖ − truthₖ)²)`, particles one per column.
pub fn rmse(params: &DMatrix<f64>, truth: &[f64]) -> Result<f64> {
    if params.nrows() != truth.len() {
        return Err(Error::DimensionMismatch {
            what: "truth",
            expected: params.nrows(),
            got: truth.len(),
        });
    }
    if params.ncols() == 0 {
        return Err(Error::InvalidArgument("rmse of an empty ensemble".into()));
    }
    let sq: f64 = params
        .column_iter()
        .map(|c| c.iter().zip(truth).map(|(x, t)| (x - t) * (x - t)).sum::<f64>())
        .sum();
    Ok((sq / params.len() as f64).sqrt())
}

/// Maps every particle (and the truth) to the model's natural space first.
pub fn natural_rmse(model: &dyn SimulatorModel, params: &DMatrix<f64>, truth_working: &[f64]) -> Result<f64> {
    let natural = to_natural_matrix(model, params);
    rmse(&natural, &model.to_natural(truth_working))
}

pub(crate) fn to_natural_matrix(model: &dyn SimulatorModel, params: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<f64> = params.column_iter().flat_map(|c| model.to_natural(c.as_slice())).collect();
    DMatrix::from_vec(params.nrows(), params.ncols(), cols)
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: String,
    pub model: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub sim_count: u64,
    /// `NaN` for failed runs.
    pub rmse: f64,
    pub wall_time_s: f64,
    /// Termination reason, or `failed: <message>`.
    pub termination: String,
    /// Final inverse temperature (EKI) or tolerance (ABC).
    pub final_temp: f64,
}

impl MetricsRow {
    pub fn failed(&self) -> bool {
        self.termination.starts_with("failed")
    }
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(METRICS_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != METRICS_HEADER {
        return Err(Error::Config(format!(
            "unexpected metrics header `{header}`, expected `{METRICS_HEADER}`"
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
