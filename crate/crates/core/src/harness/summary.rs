use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::harness::metrics::MetricsRow;

/// Median and quartiles of RMSE and simulation count for one (algorithm, N) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub runs: usize,
    pub failed: usize,
    pub rmse_q1: f64,
    pub rmse_median: f64,
    pub rmse_q3: f64,
    pub sims_q1: f64,
    pub sims_median: f64,
    pub sims_q3: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quartiles(mut v: Vec<f64>) -> [f64; 3] {
    v.sort_by(f64::total_cmp);
    [quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75)]
}

/// Groups rows by (algorithm, N); failed runs are counted but excluded from the statistics.
pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.algorithm.clone(), r.n)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((algorithm, n), rs)| {
            let ok: Vec<&MetricsRow> = rs.iter().copied().filter(|r| !r.failed()).collect();
            let [rmse_q1, rmse_median, rmse_q3] = quartiles(ok.iter().map(|r| r.rmse).collect());
            let [sims_q1, sims_median, sims_q3] = quartiles(ok.iter().map(|r| r.sim_count as f64).collect());
            SummaryRow {
                algorithm,
                n,
                runs: rs.len(),
                failed: rs.len() - ok.len(),
                rmse_q1,
                rmse_median,
                rmse_q3,
                sims_q1,
                sims_median,
                sims_q3,
            }
        })
        .collect()
}

/// Fixed-width text table of a summary.
pub fn format_table(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>6} {:>5} {:>6} {:>10} {:>10} {:>10} {:>12} {:>12} {:>12}",
        "algorithm", "N", "runs", "failed", "rmse_q1", "rmse_med", "rmse_q3", "sims_q1", "sims_med", "sims_q3"
    );
    for s in summary {
        let _ = writeln!(
            out,
            "{:<18} {:>6} {:>5} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>12.0} {:>12.0} {:>12.0}",
            s.algorithm,
            s.n,
            s.runs,
            s.failed,
            s.rmse_q1,
            s.rmse_median,
            s.rmse_q3,
            s.sims_q1,
            s.sims_median,
            s.sims_q3
        );
    }
    out
}
