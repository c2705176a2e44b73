//! Single runs and parallel parameter sweeps.

use privnet_core::sim::{self, BlockRecord, RunSummary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Axis, ExperimentConfig, SweepPoint, SweepSpec};
use crate::error::CliError;

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "PRIVNET_WORKERS";

/// One CSV row. Run rows carry `realization` and `seed`; the aggregated
/// row of a sweep point leaves both empty and averages the run rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis_value: Option<f64>,
    pub realization: Option<u64>,
    pub seed: Option<u64>,
    pub private_rate: f64,
    pub open_rate: f64,
    pub effective_private_rate: f64,
    pub empirical_outage: f64,
    pub markov_bound: f64,
    pub avg_power: f64,
    #[serde(rename = "avg_Qp")]
    pub avg_qp: f64,
    #[serde(rename = "avg_Qo")]
    pub avg_qo: f64,
    pub utility: f64,
    pub decode_failures: f64,
}

impl ResultRow {
    /// Per-node means of the fluid rates, power and backlogs; network
    /// utility; pooled outage statistics.
    pub fn from_summary(axis_value: Option<f64>, config: &ExperimentConfig, s: &RunSummary) -> Self {
        let a = &s.aggregate;
        Self {
            axis_value,
            realization: Some(config.realization),
            seed: Some(config.seed),
            private_rate: a.mu_p,
            open_rate: a.mu_o,
            effective_private_rate: a.mu_pe_fluid,
            empirical_outage: a.empirical_outage_fraction,
            markov_bound: a.markov_bound_avg,
            avg_power: a.avg_power,
            avg_qp: a.avg_q_p,
            avg_qo: a.avg_q_o,
            utility: a.utility_avg,
            decode_failures: a.decode_failures as f64,
        }
    }

    pub fn is_aggregate(&self) -> bool {
        self.realization.is_none() && self.seed.is_none()
    }

    /// Column-wise mean of `rows`, tagged with `axis_value`.
    pub fn mean(axis_value: Option<f64>, rows: &[&ResultRow]) -> Self {
        let n = rows.len() as f64;
        let avg = |f: fn(&ResultRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        Self {
            axis_value,
            realization: None,
            seed: None,
            private_rate: avg(|r| r.private_rate),
            open_rate: avg(|r| r.open_rate),
            effective_private_rate: avg(|r| r.effective_private_rate),
            empirical_outage: avg(|r| r.empirical_outage),
            markov_bound: avg(|r| r.markov_bound),
            avg_power: avg(|r| r.avg_power),
            avg_qp: avg(|r| r.avg_qp),
            avg_qo: avg(|r| r.avg_qo),
            utility: avg(|r| r.utility),
            decode_failures: avg(|r| r.decode_failures),
        }
    }
}

/// Runs one config. `trace` sees every block when given.
pub fn run_experiment(
    config: &ExperimentConfig,
    trace: Option<&mut dyn FnMut(&BlockRecord)>,
) -> Result<RunSummary, CliError> {
    let sim_config = config.to_sim_config()?;
    for w in sim_config.premise_warnings() {
        log::warn!("{w}");
    }
    let result = match trace {
        Some(f) => sim::run_traced(&sim_config, f),
        None => sim::run(&sim_config),
    };
    result.map_err(|source| CliError::Run {
        point: format!("seed {}, realization {}", config.seed, config.realization),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub point: SweepPoint,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: Axis,
    pub runs: Vec<SweepRun>,
}

impl SweepResult {
    /// Run rows of each axis value followed by that value's aggregated row,
    /// in increasing axis order.
    pub fn rows(&self) -> Vec<ResultRow> {
        let mut out: Vec<ResultRow> = Vec::new();
        let mut start = 0;
        for (i, run) in self.runs.iter().enumerate() {
            let v = run.point.axis_value;
            out.push(ResultRow::from_summary(Some(v), &run.point.config, &run.summary));
            let last = self.runs.get(i + 1).is_none_or(|next| next.point.axis_value != v);
            if last {
                let group: Vec<&ResultRow> = out[start..].iter().collect();
                let agg = ResultRow::mean(Some(v), &group);
                out.push(agg);
                start = out.len();
            }
        }
        out
    }

    /// Runs belonging to one axis value.
    pub fn runs_at(&self, axis_value: f64) -> impl Iterator<Item = &SweepRun> {
        self.runs.iter().filter(move |r| r.point.axis_value == axis_value)
    }
}

/// Worker count from [`WORKERS_ENV`], or rayon's default when unset.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, CliError> {
    run_sweep_with_workers(spec, workers_from_env())
}

/// Every point runs on its own seed, so results do not depend on `workers`.
pub fn run_sweep_with_workers(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepResult, CliError> {
    spec.validate()?;
    let points = spec.points();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().expect("thread pool");
    let axis = spec.axis;
    let results: Vec<Result<SweepRun, CliError>> = pool.install(|| {
        points
            .into_par_iter()
            .map(|point| {
                let summary = run_experiment(&point.config, None).map_err(|e| match e {
                    CliError::Run { point: p, source } => CliError::Run {
                        point: format!("{}={}, {p}", axis.name(), point.axis_value),
                        source,
                    },
                    other => other,
                })?;
                Ok(SweepRun { point, summary })
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult { axis, runs })
}
