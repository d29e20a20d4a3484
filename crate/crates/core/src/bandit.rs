//! Batched private arm elimination and clean-regret accounting.
//!
//! Batch `tau` (starting at 1) has size `B = 2^tau`. While `B` is below the
//! estimator's minimum sample size the whole batch goes to one uniformly
//! random active arm. Afterwards every active arm is pulled `B` times on
//! fresh rewards, estimated privately from that batch alone, and any arm more
//! than `2 beta` below the leader is dropped. Confidence is split as
//! `delta / (2 |S| tau^2)` per arm and batch.
//!
//! Each reward feeds exactly one private release, so the whole run is
//! epsilon-DP by parallel composition over disjoint batches.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::BanditInstance;
use crate::error::{Error, Result};
use crate::estimators::{
    central_schedule, prm_central, prm_raw, raw_schedule, Estimate, PrmCentralParams, PrmRawParams,
};
use crate::privacy::{NoiseMode, NoiseSource, ReleaseRecord};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    RawPrm,
    CentralPrm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    /// Arm elimination with the raw-moment estimator.
    #[serde(rename = "prae-r")]
    PraeRaw,
    /// Arm elimination with the central-moment estimator.
    #[serde(rename = "prae-c")]
    PraeCentral,
    /// Non-robust stand-in for a private heavy-tailed elimination baseline.
    #[serde(rename = "dprse")]
    Dprse,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::PraeRaw, Algorithm::PraeCentral, Algorithm::Dprse];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::PraeRaw => "prae-r",
            Algorithm::PraeCentral => "prae-c",
            Algorithm::Dprse => "dprse",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.id() == s).ok_or_else(|| {
            Error::param(
                "algorithm",
                format!("unknown algorithm `{s}` (expected prae-r, prae-c or dprse)"),
            )
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunParams {
    pub epsilon: f64,
    /// Overall failure probability of the confidence events.
    pub delta: f64,
    /// Contamination level assumed by the estimator schedules.
    pub alpha: f64,
    /// Moment order.
    pub k: f64,
    pub horizon: u64,
}

/// How batch estimates are produced. Everything except `Private` exists for testing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EstimateMode {
    #[default]
    Private,
    /// The private estimators with the Laplace noise switched off.
    Noiseless,
    /// Every estimate equals the arm's true mean.
    TrueMeans,
    /// Optimal arms report `mu - beta`, all others `mu + beta`: the least
    /// favourable estimates consistent with the confidence radius.
    WorstCase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Random,
    Eliminate,
}

/// Mutable state of the elimination loop.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgState {
    pub active: BTreeSet<usize>,
    pub tau: u32,
    pub pulls_used: u64,
    /// Latest estimate per arm, indexed by arm.
    pub estimates: Vec<Option<Estimate>>,
    pub phase: Phase,
}

impl AlgState {
    fn new(arm_count: usize) -> Self {
        Self {
            active: (0..arm_count).collect(),
            tau: 0,
            pulls_used: 0,
            estimates: vec![None; arm_count],
            phase: Phase::Random,
        }
    }
}

/// Batch sizes `2^tau`, saturating at `u64::MAX`.
pub fn batch_size(tau: u32) -> u64 {
    1u64.checked_shl(tau).unwrap_or(u64::MAX)
}

/// What happened in one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchRecord {
    pub tau: u32,
    pub batch_size: u64,
    pub phase: Phase,
    pub active_before: Vec<usize>,
    /// Sample indices (global pull counter) that fed each arm's estimate.
    pub samples: Vec<(usize, Range<u64>)>,
    pub estimates: Vec<(usize, Estimate)>,
    pub radius: Option<f64>,
    pub eliminated: Vec<usize>,
    /// False when the horizon ran out inside the batch.
    pub completed: bool,
}

/// Releases and batch records of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub releases: Vec<ReleaseRecord>,
    pub batches: Vec<BatchRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub algorithm: String,
    pub seed: u64,
    pub stream_id: u64,
    pub epsilon: f64,
    pub alpha: f64,
    pub instance: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegretTrace {
    /// Cumulative clean regret after each round.
    pub cumulative: Vec<f64>,
    pub actions: Vec<usize>,
    pub meta: TraceMeta,
}

impl RegretTrace {
    pub fn rounds(&self) -> usize {
        self.cumulative.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Cumulative `sum_{s <= t} (mu* - mu_{a_s})` over inlier means.
pub fn clean_regret(actions: &[usize], instance: &BanditInstance) -> Result<Vec<f64>> {
    let mut total = 0.0;
    actions
        .iter()
        .map(|&a| {
            total += instance.gap(a)?;
            Ok(total)
        })
        .collect()
}

/// Arm elimination with the chosen private robust estimator.
pub fn prae_run(
    instance: &BanditInstance,
    estimator: EstimatorKind,
    params: &RunParams,
    rng: &RngStream,
) -> Result<RegretTrace> {
    let algorithm = match estimator {
        EstimatorKind::RawPrm => Algorithm::PraeRaw,
        EstimatorKind::CentralPrm => Algorithm::PraeCentral,
    };
    run_algorithm(instance, algorithm, params, EstimateMode::Private, rng, None)
}

/// The baseline: same skeleton, but truncation at `(B eps / ln(1/delta))^(1/k)`
/// with no regard for contamination and a radius without the contamination term.
///
/// This is a simplified stand-in, not a reproduction of any published baseline.
pub fn dprse_baseline_run(instance: &BanditInstance, params: &RunParams, rng: &RngStream) -> Result<RegretTrace> {
    run_algorithm(instance, Algorithm::Dprse, params, EstimateMode::Private, rng, None)
}

enum Plan {
    Random,
    Raw(PrmRawParams),
    Central(PrmCentralParams),
}

impl Plan {
    fn radius(&self) -> Option<f64> {
        match self {
            Plan::Random => None,
            Plan::Raw(p) => Some(p.radius),
            Plan::Central(p) => Some(p.radius),
        }
    }
}

fn plan_batch(
    algorithm: Algorithm,
    params: &RunParams,
    range: f64,
    batch: u64,
    active: usize,
    tau: u32,
) -> Result<Plan> {
    let tau_f = tau as f64;
    let delta_tau = params.delta / (2.0 * active as f64 * tau_f * tau_f);
    let n = usize::try_from(batch).unwrap_or(usize::MAX);
    match algorithm {
        Algorithm::PraeRaw => {
            let p = raw_schedule(n, params.epsilon, delta_tau, params.k, params.alpha)?;
            Ok(if batch < p.min_n { Plan::Random } else { Plan::Raw(p) })
        }
        Algorithm::PraeCentral => {
            let p = central_schedule(n / 2, params.epsilon, delta_tau, params.k, params.alpha, range)?;
            Ok(if ((n / 2) as u64) < p.min_n {
                Plan::Random
            } else {
                Plan::Central(p)
            })
        }
        Algorithm::Dprse => {
            let mut p = raw_schedule(n, params.epsilon, delta_tau, params.k, 0.0)?;
            p.threshold = (batch as f64 * params.epsilon / (1.0 / delta_tau).ln()).powf(1.0 / params.k);
            p.alpha = params.alpha;
            Ok(Plan::Raw(p))
        }
    }
}

/// Checks every parameter domain a run would hit, without pulling any arm.
pub fn check_run(algorithm: Algorithm, params: &RunParams, instance: &BanditInstance) -> Result<()> {
    if params.horizon == 0 {
        return Err(Error::param("horizon", "need T >= 1"));
    }
    if algorithm == Algorithm::Dprse && !(0.0..=1.0).contains(&params.alpha) {
        return Err(Error::param(
            "alpha",
            format!("must lie in [0, 1], got {}", params.alpha),
        ));
    }
    // The first batch exercises every domain check of the schedules.
    plan_batch(algorithm, params, instance.mean_range(), 2, instance.arm_count(), 1).map(|_| ())
}

/// Runs `algorithm` for `params.horizon` rounds.
///
/// `rng` is not advanced; the run derives its own substreams for arm
/// selection, rewards and noise.
pub fn run_algorithm(
    instance: &BanditInstance,
    algorithm: Algorithm,
    params: &RunParams,
    mode: EstimateMode,
    rng: &RngStream,
    mut log: Option<&mut RunLog>,
) -> Result<RegretTrace> {
    check_run(algorithm, params, instance)?;

    let horizon = params.horizon;
    let mut select_rng = rng.substream(0);
    let mut reward_rng = rng.substream(1);
    let mut noise_rng = rng.substream(2);

    let mut state = AlgState::new(instance.arm_count());
    let capacity = usize::try_from(horizon).unwrap_or(usize::MAX).min(1 << 24);
    let mut cumulative = Vec::with_capacity(capacity);
    let mut actions = Vec::with_capacity(capacity);
    let mut total = 0.0;

    let mut pull = |arm: usize, state: &mut AlgState, reward_rng: &mut RngStream| -> Result<f64> {
        let reward = instance.sample_reward(arm, reward_rng)?;
        total += instance.gap(arm)?;
        cumulative.push(total);
        actions.push(arm);
        state.pulls_used += 1;
        Ok(reward)
    };

    'batches: while state.pulls_used < horizon {
        if state.active.len() == 1 {
            let arm = *state.active.first().expect("active set is never empty");
            while state.pulls_used < horizon {
                pull(arm, &mut state, &mut reward_rng)?;
            }
            break;
        }

        state.tau += 1;
        let batch = batch_size(state.tau);
        let active_before: Vec<usize> = state.active.iter().copied().collect();
        let plan = plan_batch(
            algorithm,
            params,
            instance.mean_range(),
            batch,
            active_before.len(),
            state.tau,
        )?;
        let mut record = BatchRecord {
            tau: state.tau,
            batch_size: batch,
            phase: Phase::Random,
            active_before: active_before.clone(),
            samples: Vec::new(),
            estimates: Vec::new(),
            radius: plan.radius(),
            eliminated: Vec::new(),
            completed: false,
        };

        if let Plan::Random = plan {
            state.phase = Phase::Random;
            let arm = active_before[select_rng.random_range(0..active_before.len())];
            let mut played = 0;
            while played < batch && state.pulls_used < horizon {
                pull(arm, &mut state, &mut reward_rng)?;
                played += 1;
            }
            record.completed = played == batch;
            if let Some(log) = log.as_deref_mut() {
                log.batches.push(record);
            }
            continue;
        }

        state.phase = Phase::Eliminate;
        record.phase = Phase::Eliminate;
        let radius = plan.radius().expect("estimation plan has a radius");
        let mut samples = Vec::with_capacity(usize::try_from(batch).unwrap_or(0).min(1 << 24));
        for &arm in &active_before {
            samples.clear();
            let start = state.pulls_used;
            while (samples.len() as u64) < batch {
                if state.pulls_used == horizon {
                    // Partial batches are discarded without a release.
                    if let Some(log) = log.as_deref_mut() {
                        log.batches.push(record);
                    }
                    break 'batches;
                }
                samples.push(pull(arm, &mut state, &mut reward_rng)?);
            }
            record.samples.push((arm, start..state.pulls_used));

            let estimate = match mode {
                EstimateMode::TrueMeans => Estimate {
                    value: instance.true_means()[arm],
                    radius,
                    n_used: samples.len(),
                },
                EstimateMode::WorstCase => {
                    let mu = instance.true_means()[arm];
                    let value = if mu == instance.optimal_mean() {
                        mu - radius
                    } else {
                        mu + radius
                    };
                    Estimate {
                        value,
                        radius,
                        n_used: samples.len(),
                    }
                }
                EstimateMode::Private | EstimateMode::Noiseless => {
                    let noise_mode = if mode == EstimateMode::Noiseless {
                        NoiseMode::Noiseless
                    } else {
                        NoiseMode::Laplace
                    };
                    let mut noise = NoiseSource::with_mode(&mut noise_rng, noise_mode);
                    if let Some(log) = log.as_deref_mut() {
                        noise = noise.observed(&mut log.releases);
                    }
                    match &plan {
                        Plan::Raw(p) => prm_raw(&samples, p, &mut noise)?,
                        Plan::Central(p) => prm_central(&samples[..2 * p.n], p, &mut noise)?,
                        Plan::Random => unreachable!(),
                    }
                }
            };
            state.estimates[arm] = Some(estimate);
            record.estimates.push((arm, estimate));
        }

        let leader = record
            .estimates
            .iter()
            .map(|(_, e)| e.value)
            .fold(f64::NEG_INFINITY, f64::max);
        for &(arm, est) in &record.estimates {
            if leader - est.value > 2.0 * radius {
                state.active.remove(&arm);
                record.eliminated.push(arm);
            }
        }
        record.completed = true;
        if let Some(log) = log.as_deref_mut() {
            log.batches.push(record);
        }
    }

    Ok(RegretTrace {
        cumulative,
        actions,
        meta: TraceMeta {
            algorithm: algorithm.id().to_string(),
            seed: rng.seed(),
            stream_id: rng.stream_id(),
            epsilon: params.epsilon,
            alpha: params.alpha,
            instance: instance.label().to_string(),
        },
    })
}
