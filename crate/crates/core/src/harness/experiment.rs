use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, StudyEstimator};
use crate::bandit::{run_algorithm, Algorithm, EstimateMode, RunParams};
use crate::error::{Error, Result};
use crate::estimators::{central_schedule, prm_central, prm_raw, raw_schedule};
use crate::privacy::{audit_sensitivity, truncated_mean_sensitivity, NoiseSource};
use crate::rng::RngStream;

/// One subsampled point of a regret curve.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretRow {
    pub run_id: u64,
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub alpha: f64,
    pub seed: u64,
    pub t: u64,
    pub cum_regret: f64,
}

/// Empirical `(1 - delta)`-quantile of the estimation error next to the claimed radius.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationRow {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub k: f64,
    pub estimator: StudyEstimator,
    pub empirical_quantile: f64,
    pub theoretical_beta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub n: usize,
    pub threshold: f64,
    pub trials: usize,
    pub max_observed: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResultRows {
    Regret(Vec<RegretRow>),
    Concentration(Vec<ConcentrationRow>),
    Audit(Vec<AuditRow>),
}

impl ResultRows {
    pub fn len(&self) -> usize {
        match self {
            ResultRows::Regret(r) => r.len(),
            ResultRows::Concentration(r) => r.len(),
            ResultRows::Audit(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub cell: u64,
    pub description: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub rows: ResultRows,
    pub failures: Vec<CellFailure>,
}

/// Bandit cell: one algorithm at one grid point for one repetition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunCell {
    pub run_id: u64,
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub alpha: f64,
    pub repeat: u32,
}

impl RunCell {
    pub fn seed(&self, base_seed: u64) -> u64 {
        base_seed.wrapping_add(self.repeat as u64)
    }

    /// The run's stream: seed `base_seed + repeat`, stream id `run_id`.
    pub fn stream(&self, base_seed: u64) -> RngStream {
        RngStream::new(self.seed(base_seed), self.run_id)
    }
}

/// Bandit cells in emission order: algorithm, then epsilon, then alpha, then repeat.
pub fn run_cells(cfg: &ExperimentConfig) -> Vec<RunCell> {
    let mut cells = Vec::new();
    for &algorithm in &cfg.algorithms {
        for &epsilon in &cfg.epsilon {
            for &alpha in &cfg.alpha {
                for repeat in 0..cfg.repeats {
                    cells.push(RunCell {
                        run_id: cells.len() as u64,
                        algorithm,
                        epsilon,
                        alpha,
                        repeat,
                    });
                }
            }
        }
    }
    cells
}

/// Rounds (1-based) kept at the given stride; the final round is always kept.
pub fn sampled_rounds(horizon: u64, stride: Option<u64>) -> Vec<u64> {
    let stride = stride.unwrap_or(1).max(1);
    let mut rounds: Vec<u64> = (1..=horizon / stride).map(|i| i * stride).collect();
    if rounds.last() != Some(&horizon) {
        rounds.push(horizon);
    }
    rounds
}

/// Runs every cell of `cfg` on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    Ok(match cfg.kind {
        ExperimentKind::RegretCurves | ExperimentKind::HardInstance => run_regret(cfg),
        ExperimentKind::ConcentrationStudy => run_concentration(cfg),
        ExperimentKind::SensitivityAudit => run_audit(cfg),
    })
}

/// Like [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_on(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

fn split<T>(results: Vec<(u64, String, Result<Vec<T>>)>) -> (Vec<T>, Vec<CellFailure>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (cell, description, result) in results {
        match result {
            Ok(r) => rows.extend(r),
            Err(e) => failures.push(CellFailure {
                cell,
                description,
                error: e.to_string(),
            }),
        }
    }
    (rows, failures)
}

fn run_regret(cfg: &ExperimentConfig) -> ExperimentOutput {
    let rounds = sampled_rounds(cfg.horizon, cfg.stride);
    let results: Vec<_> = run_cells(cfg)
        .into_par_iter()
        .map(|cell| {
            let description = format!(
                "{} epsilon={} alpha={} repeat={}",
                cell.algorithm, cell.epsilon, cell.alpha, cell.repeat
            );
            let result = regret_cell(cfg, &cell, &rounds);
            (cell.run_id, description, result)
        })
        .collect();
    let (rows, failures) = split(results);
    ExperimentOutput {
        rows: ResultRows::Regret(rows),
        failures,
    }
}

fn regret_cell(cfg: &ExperimentConfig, cell: &RunCell, rounds: &[u64]) -> Result<Vec<RegretRow>> {
    let instance = cfg.instance_for(cell.alpha)?;
    let params = RunParams {
        epsilon: cell.epsilon,
        delta: cfg.delta,
        alpha: cell.alpha,
        k: cfg.k,
        horizon: cfg.horizon,
    };
    let trace = run_algorithm(
        &instance,
        cell.algorithm,
        &params,
        EstimateMode::Private,
        &cell.stream(cfg.base_seed),
        None,
    )?;
    Ok(rounds
        .iter()
        .map(|&t| RegretRow {
            run_id: cell.run_id,
            algorithm: cell.algorithm,
            epsilon: cell.epsilon,
            alpha: cell.alpha,
            seed: cell.seed(cfg.base_seed),
            t,
            cum_regret: trace.cumulative[(t - 1) as usize],
        })
        .collect())
}

/// Order statistic at rank `ceil(q m)` of `values` (1-based), i.e. the smallest
/// value with at least a `q` fraction of the sample at or below it.
pub fn empirical_quantile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    values.sort_by(f64::total_cmp);
    let rank = (q * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

#[derive(Clone, Copy, Debug)]
struct StudyCell {
    id: u64,
    estimator: StudyEstimator,
    n: usize,
    epsilon: f64,
    alpha: f64,
}

fn run_concentration(cfg: &ExperimentConfig) -> ExperimentOutput {
    let c = &cfg.concentration;
    let mut cells = Vec::new();
    for &estimator in &c.estimators {
        for &epsilon in &cfg.epsilon {
            for &alpha in &cfg.alpha {
                for &n in &c.sample_sizes {
                    cells.push(StudyCell {
                        id: cells.len() as u64,
                        estimator,
                        n,
                        epsilon,
                        alpha,
                    });
                }
            }
        }
    }
    let results: Vec<_> = cells
        .into_iter()
        .map(|cell| {
            let description = format!(
                "{} n={} epsilon={} alpha={}",
                cell.estimator.id(),
                cell.n,
                cell.epsilon,
                cell.alpha
            );
            (cell.id, description, study_cell(cfg, &cell).map(|row| vec![row]))
        })
        .collect();
    let (rows, failures) = split(results);
    ExperimentOutput {
        rows: ResultRows::Concentration(rows),
        failures,
    }
}

fn study_cell(cfg: &ExperimentConfig, cell: &StudyCell) -> Result<ConcentrationRow> {
    let c = &cfg.concentration;
    let instance = cfg.study_instance(cell.alpha)?;
    let mu = instance.true_means()[0];
    let root = RngStream::new(cfg.base_seed, cell.id);
    let (beta, errors): (f64, Vec<f64>) = match cell.estimator {
        StudyEstimator::Raw => {
            let params = raw_schedule(cell.n, cell.epsilon, cfg.delta, cfg.k, cell.alpha)?;
            let errors = (0..c.repetitions as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = root.substream(rep);
                    let data = (0..cell.n)
                        .map(|_| instance.sample_reward(0, &mut rng))
                        .collect::<Result<Vec<_>>>()?;
                    let est = prm_raw(&data, &params, &mut NoiseSource::laplace(&mut rng))?;
                    Ok((est.value - mu).abs())
                })
                .collect::<Result<Vec<_>>>()?;
            (params.radius, errors)
        }
        StudyEstimator::Central => {
            let params = central_schedule(cell.n, cell.epsilon, cfg.delta, cfg.k, cell.alpha, c.mean_range)?;
            let errors = (0..c.repetitions as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = root.substream(rep);
                    let data = (0..2 * cell.n)
                        .map(|_| instance.sample_reward(0, &mut rng))
                        .collect::<Result<Vec<_>>>()?;
                    let est = prm_central(&data, &params, &mut NoiseSource::laplace(&mut rng))?;
                    Ok((est.value - mu).abs())
                })
                .collect::<Result<Vec<_>>>()?;
            (params.radius, errors)
        }
    };
    let mut errors = errors;
    Ok(ConcentrationRow {
        n: cell.n,
        epsilon: cell.epsilon,
        delta: cfg.delta,
        alpha: cell.alpha,
        k: cfg.k,
        estimator: cell.estimator,
        empirical_quantile: empirical_quantile(&mut errors, 1.0 - cfg.delta),
        theoretical_beta: beta,
    })
}

fn run_audit(cfg: &ExperimentConfig) -> ExperimentOutput {
    let a = &cfg.audit;
    let mut cells = Vec::new();
    for &n in &a.sample_sizes {
        for &threshold in &a.thresholds {
            cells.push((cells.len() as u64, n, threshold));
        }
    }
    let results: Vec<_> = cells
        .into_par_iter()
        .map(|(id, n, threshold)| {
            let mut rng = RngStream::new(cfg.base_seed, id);
            let row = audit_sensitivity(n, threshold, a.trials, &mut rng).and_then(|max_observed| {
                Ok(AuditRow {
                    n,
                    threshold,
                    trials: a.trials,
                    max_observed,
                    bound: truncated_mean_sensitivity(n, threshold)?,
                })
            });
            (id, format!("n={n} threshold={threshold}"), row.map(|r| vec![r]))
        })
        .collect();
    let (rows, failures) = split(results);
    ExperimentOutput {
        rows: ResultRows::Audit(rows),
        failures,
    }
}
