//! Monte Carlo sweeps over an error model parameter.
//!
//! Seeds: trial `t` uses `trial_seed = derive_seed(master_seed, t)` for the
//! geometry, `derive_seed(trial_seed, 1)` for the measurement errors and
//! `derive_seed(trial_seed, 2)` for the baseline start. The same draws are
//! reused at every sweep point, so a uniform sweep scales one fixed error
//! pattern by γ.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::baseline_least_squares;
use crate::central::solve_minmax_sdp;
use crate::dist::{run_dis_minmax, DisMinMaxConfig};
use crate::error::{Error, Result};
use crate::metrics::{mean_stdev, rmse};
use crate::model::{apply_errors, generate_scenario, ErrorModel, NodeId, Point2, ScenarioConfig};
use crate::sdp::SolverConfig;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Central,
    Distributed,
    Baseline,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Central => "central",
            Estimator::Distributed => "distributed",
            Estimator::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    /// One sweep point per model.
    pub sweep: Vec<ErrorModel>,
    pub estimators: Vec<Estimator>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub dist: DisMinMaxConfig,
}

impl ExperimentSpec {
    pub fn check(&self) -> Result<()> {
        if self.sweep.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidScenario("experiment needs sweep points and estimators".into()));
        }
        for m in &self.sweep {
            m.check()?;
        }
        self.solver.check()?;
        self.dist.check()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)
            .map_err(|source| Error::Json { context: "experiment spec".into(), source })?;
        spec.check()?;
        Ok(spec)
    }
}

/// The swept parameter: `γ` for uniform, `σ` for Gaussian, the outlier
/// ratio for mixtures.
pub fn sweep_value(model: &ErrorModel) -> f64 {
    match *model {
        ErrorModel::Uniform { gamma } => gamma,
        ErrorModel::Gaussian { sigma } => sigma,
        ErrorModel::Mixture { ratio, .. } => ratio,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Runtimes {
    pub central: Option<f64>,
    pub distributed: Option<f64>,
    pub baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub errors_within_bound: bool,
    pub rmse_central: Option<f64>,
    pub worst_case_value: Option<f64>,
    pub rmse_distributed_by_round: Vec<f64>,
    pub rmse_upper_bound_by_round: Vec<f64>,
    pub rmse_baseline: Option<f64>,
    pub baseline_converged: Option<bool>,
    pub runtimes: Runtimes,
    /// One message per estimator that failed on this trial.
    pub failures: Vec<String>,
}

impl TrialRecord {
    pub fn rmse(&self, est: Estimator) -> Option<f64> {
        match est {
            Estimator::Central => self.rmse_central,
            Estimator::Distributed => self.rmse_distributed_by_round.last().copied(),
            Estimator::Baseline => self.rmse_baseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub estimator: Estimator,
    /// Trials with a result.
    pub count: usize,
    pub mean_rmse: f64,
    pub stdev_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sweep_value: f64,
    pub model: ErrorModel,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub points: Vec<SweepPoint>,
}

fn run_trial(spec: &ExperimentSpec, model: &ErrorModel, trial: usize) -> TrialRecord {
    let seed = derive_seed(spec.master_seed, trial as u64);
    let mut rec = TrialRecord {
        trial,
        seed,
        errors_within_bound: false,
        rmse_central: None,
        worst_case_value: None,
        rmse_distributed_by_round: Vec::new(),
        rmse_upper_bound_by_round: Vec::new(),
        rmse_baseline: None,
        baseline_converged: None,
        runtimes: Runtimes::default(),
        failures: Vec::new(),
    };
    let scenario = match generate_scenario(&spec.scenario, seed)
        .and_then(|s| apply_errors(&s, model, derive_seed(seed, 1)))
    {
        Ok(s) => s,
        Err(e) => {
            rec.failures.push(format!("scenario: {e}"));
            return rec;
        }
    };
    let truth = scenario.true_positions.clone().expect("generated scenarios carry truth");
    rec.errors_within_bound = scenario.errors_within_bound().unwrap_or(false);
    let score = |p: &BTreeMap<NodeId, Point2>| rmse(p, &truth);

    for &est in &spec.estimators {
        let t0 = Instant::now();
        let outcome: Result<()> = match est {
            Estimator::Central => solve_minmax_sdp(&scenario, &spec.solver).and_then(|c| {
                rec.rmse_central = Some(score(&c.positions)?);
                rec.worst_case_value = Some(c.worst_case_value);
                Ok(())
            }),
            Estimator::Distributed => run_dis_minmax(&scenario, &spec.dist).and_then(|tr| {
                for r in &tr.rounds {
                    let p = r.per_node.iter().map(|n| (n.id, Point2::new(n.x, n.y))).collect();
                    rec.rmse_distributed_by_round.push(score(&p)?);
                    rec.rmse_upper_bound_by_round.push(r.rmse_upper_bound);
                }
                Ok(())
            }),
            Estimator::Baseline => {
                baseline_least_squares(&scenario, spec.scenario.area, derive_seed(seed, 2)).and_then(|b| {
                    rec.rmse_baseline = Some(score(&b.positions)?);
                    rec.baseline_converged = Some(b.converged);
                    Ok(())
                })
            }
        };
        let secs = Some(t0.elapsed().as_secs_f64());
        match est {
            Estimator::Central => rec.runtimes.central = secs,
            Estimator::Distributed => rec.runtimes.distributed = secs,
            Estimator::Baseline => rec.runtimes.baseline = secs,
        }
        if let Err(e) = outcome {
            rec.failures.push(format!("{}: {e}", est.name()));
        }
    }
    rec
}

fn aggregates(spec: &ExperimentSpec, trials: &[TrialRecord]) -> Vec<Aggregate> {
    spec.estimators
        .iter()
        .map(|&est| {
            let v: Vec<f64> = trials.iter().filter_map(|t| t.rmse(est)).collect();
            let (mean_rmse, stdev_rmse) = mean_stdev(&v);
            Aggregate { estimator: est, count: v.len(), mean_rmse, stdev_rmse }
        })
        .collect()
}

/// Run every trial of every sweep point. Trials run in parallel; results are
/// kept in trial order. Estimator failures are recorded per trial.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.check()?;
    let points = spec
        .sweep
        .iter()
        .map(|model| {
            let trials: Vec<TrialRecord> =
                (0..spec.trials).into_par_iter().map(|t| run_trial(spec, model, t)).collect();
            SweepPoint { sweep_value: sweep_value(model), model: *model, aggregates: aggregates(spec, &trials), trials }
        })
        .collect();
    Ok(ExperimentReport { spec: spec.clone(), points })
}

/// CSV columns, in order.
pub const CSV_HEADER: [&str; 7] = ["sweep_value", "estimator", "trial", "rmse", "worst_case_value", "rounds", "seconds"];

#[derive(Debug, Serialize)]
struct CsvRow {
    sweep_value: f64,
    estimator: &'static str,
    trial: usize,
    rmse: Option<f64>,
    worst_case_value: Option<f64>,
    rounds: Option<usize>,
    seconds: Option<f64>,
}

/// One row per sweep point × trial × estimator, in that nesting order.
/// `rounds` is the number of refinement rounds for the distributed estimator
/// and empty otherwise; `seconds` is the only timing column.
pub fn write_csv<W: Write>(report: &ExperimentReport, w: W) -> std::result::Result<(), csv::Error> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(CSV_HEADER)?;
    for p in &report.points {
        for t in &p.trials {
            for &est in &report.spec.estimators {
                let (wcv, rounds, seconds) = match est {
                    Estimator::Central => (t.worst_case_value, None, t.runtimes.central),
                    Estimator::Distributed => (
                        None,
                        t.rmse_distributed_by_round.len().checked_sub(1),
                        t.runtimes.distributed,
                    ),
                    Estimator::Baseline => (None, None, t.runtimes.baseline),
                };
                out.serialize(CsvRow {
                    sweep_value: p.sweep_value,
                    estimator: est.name(),
                    trial: t.trial,
                    rmse: t.rmse(est),
                    worst_case_value: wcv,
                    rounds,
                    seconds,
                })?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Write the CSV table and the full JSON report.
pub fn emit_outputs(report: &ExperimentReport, csv_path: &Path, json_path: &Path) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    let f = std::fs::File::create(csv_path).map_err(io(csv_path))?;
    write_csv(report, std::io::BufWriter::new(f))
        .map_err(|source| Error::Csv { path: csv_path.to_path_buf(), source })?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|source| Error::Json { context: "experiment report".into(), source })?;
    std::fs::write(json_path, json).map_err(io(json_path))
}
