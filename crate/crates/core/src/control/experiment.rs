//! Cost convergence along a sequence of controls, with common random numbers.

use serde::{Deserialize, Serialize};

use super::problem::ProblemSpec;
use super::sim::{cost_estimate, mean_and_error, SimResult};
use crate::cadlag::CadlagPath;
use crate::error::{Error, Result};
use crate::metrics::d_p;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub label: u64,
    /// `d_p(U_n, U_limit)`.
    pub d_p: f64,
    pub cost: f64,
    pub std_error: f64,
    /// `|J(U_n) - J(U_limit)|`.
    pub gap: f64,
    /// Standard error of the paired per-path differences.
    pub gap_std_error: f64,
    pub moment_control: f64,
    pub moment_state: f64,
    pub exits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub limit_cost: f64,
    pub limit_std_error: f64,
    pub p_star: f64,
    pub sup_moment_control: f64,
    pub sup_moment_state: f64,
    /// `max / min` of the control moments over the sequence and the limit.
    pub moment_control_ratio: f64,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "# schema: wm1-experiment v1\nn,d_p,J,stderr,gap,gap_stderr,moment_control,moment_state,exits\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.label, r.d_p, r.cost, r.std_error, r.gap, r.gap_std_error, r.moment_control, r.moment_state, r.exits
            ));
        }
        s
    }
}

/// Estimates the cost of every control and of the limit with the same seed, so
/// the gaps compare the controls on identical noise.
pub fn convergence_experiment(
    spec: &ProblemSpec,
    controls: &[CadlagPath],
    labels: &[u64],
    limit: &CadlagPath,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<ExperimentReport> {
    if controls.is_empty() {
        return Err(Error::Domain("no controls".into()));
    }
    if !labels.is_empty() && labels.len() != controls.len() {
        return Err(Error::Shape(format!("{} labels for {} controls", labels.len(), controls.len())));
    }
    let base: SimResult = cost_estimate(spec, limit, n_paths, dt, seed)?;
    let mut rows = Vec::with_capacity(controls.len());
    let mut moments = vec![base.moment_control];
    for (i, control) in controls.iter().enumerate() {
        let res = cost_estimate(spec, control, n_paths, dt, seed)?;
        let diffs: Vec<f64> = res.costs.iter().zip(&base.costs).map(|(a, b)| a - b).collect();
        let (gap, gap_std_error) = mean_and_error(&diffs);
        moments.push(res.moment_control);
        rows.push(ExperimentRow {
            label: labels.get(i).copied().unwrap_or(i as u64),
            d_p: d_p(control, limit)?,
            cost: res.mean,
            std_error: res.std_error,
            gap: gap.abs(),
            gap_std_error,
            moment_control: res.moment_control,
            moment_state: res.moment_state,
            exits: res.exit_count,
        });
    }
    let max_m = moments.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_m = moments.iter().copied().fold(f64::INFINITY, f64::min);
    let sup_moment_state = rows.iter().map(|r| r.moment_state).fold(base.moment_state, f64::max);
    Ok(ExperimentReport {
        limit_cost: base.mean,
        limit_std_error: base.std_error,
        p_star: base.p_star,
        sup_moment_control: max_m,
        sup_moment_state,
        moment_control_ratio: if min_m > 0.0 { max_m / min_m } else if max_m == 0.0 { 1.0 } else { f64::INFINITY },
        rows,
    })
}
