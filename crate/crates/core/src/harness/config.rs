use serde::{Deserialize, Serialize};

use crate::bandit::{check_run, Algorithm, RunParams};
use crate::env::{make_hard_instance, make_linear_means_instance, BanditInstance, HardVariant, InlierFamily, Outlier};
use crate::error::{Error, Result};
use crate::estimators::{central_schedule, raw_schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RegretCurves,
    ConcentrationStudy,
    SensitivityAudit,
    HardInstance,
}

/// Horizon and repetition defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Profile {
    /// `T = 10^4`, 10 repetitions.
    Desk,
    /// `T = 10^5`, 30 repetitions.
    #[default]
    Paper,
}

impl Profile {
    pub fn horizon(self) -> u64 {
        match self {
            Profile::Desk => 10_000,
            Profile::Paper => 100_000,
        }
    }

    pub fn repeats(self) -> u32 {
        match self {
            Profile::Desk => 10,
            Profile::Paper => 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyEstimator {
    Raw,
    Central,
}

impl StudyEstimator {
    pub fn id(self) -> &'static str {
        match self {
            StudyEstimator::Raw => "raw",
            StudyEstimator::Central => "central",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    pub family: InlierFamily,
    pub arms: usize,
    pub outlier: Outlier,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            family: InlierFamily::StudentT,
            arms: 5,
            outlier: Outlier::BENCHMARK,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub estimators: Vec<StudyEstimator>,
    /// Sample sizes; per fold for the central estimator.
    pub sample_sizes: Vec<usize>,
    pub repetitions: usize,
    /// Inlier mean of the study distribution.
    pub mean: f64,
    /// Mean range `D` handed to the central estimator.
    pub mean_range: f64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            estimators: vec![StudyEstimator::Raw],
            sample_sizes: (10..=16).map(|p| 1usize << p).collect(),
            repetitions: 2000,
            mean: 0.0,
            mean_range: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub sample_sizes: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub trials: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            sample_sizes: vec![1, 2, 5, 16, 64],
            thresholds: vec![0.0, 0.1, 1.0, 10.0],
            trials: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardConfig {
    pub gamma: f64,
    pub variant: HardVariant,
}

impl Default for HardConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            variant: HardVariant::Nu1,
        }
    }
}

/// A fully resolved experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub algorithms: Vec<Algorithm>,
    pub epsilon: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta: f64,
    pub k: f64,
    pub horizon: u64,
    pub repeats: u32,
    pub base_seed: u64,
    /// Emit every `stride`-th round (plus the last); `None` means every round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub instance: InstanceConfig,
    pub concentration: ConcentrationConfig,
    pub audit: AuditConfig,
    pub hard: HardConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    kind: Option<ExperimentKind>,
    algorithms: Option<Vec<Algorithm>>,
    epsilon: Option<Vec<f64>>,
    alpha: Option<Vec<f64>>,
    delta: Option<f64>,
    k: Option<f64>,
    horizon: Option<u64>,
    repeats: Option<u32>,
    base_seed: Option<u64>,
    stride: Option<u64>,
    full_resolution: Option<bool>,
    output: Option<String>,
    instance: Option<InstanceConfig>,
    concentration: Option<ConcentrationConfig>,
    audit: Option<AuditConfig>,
    hard: Option<HardConfig>,
}

/// Parses a TOML experiment document with the full-scale defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, Profile::Paper)
}

/// Parses a TOML experiment document; unset horizon and repeat counts come from `profile`.
///
/// The confidence level defaults to `1/T` for bandit runs and 0.05 for concentration studies.
pub fn parse_config_with(text: &str, profile: Profile) -> Result<ExperimentConfig> {
    let doc: ConfigDoc = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let kind = doc.kind.unwrap_or(ExperimentKind::RegretCurves);
    let horizon = doc.horizon.unwrap_or_else(|| profile.horizon());
    let default_delta = match kind {
        ExperimentKind::ConcentrationStudy => 0.05,
        _ => 1.0 / horizon.max(2) as f64,
    };
    let stride = match (doc.full_resolution, doc.stride) {
        (Some(true), Some(_)) => {
            return Err(Error::Config(
                "`stride` and `full_resolution = true` are mutually exclusive".into(),
            ))
        }
        (Some(true), None) => None,
        (_, Some(s)) => Some(s),
        (_, None) => Some((horizon / 1000).max(1)),
    };
    let cfg = ExperimentConfig {
        kind,
        algorithms: doc.algorithms.unwrap_or_else(|| match kind {
            // Hard instances live in [0, 1/gamma], too narrow for the central histogram.
            ExperimentKind::HardInstance => vec![Algorithm::PraeRaw, Algorithm::Dprse],
            _ => Algorithm::ALL.to_vec(),
        }),
        epsilon: doc.epsilon.unwrap_or_else(|| vec![0.2, 0.5, 1.0]),
        alpha: doc.alpha.unwrap_or_else(|| vec![0.05]),
        delta: doc.delta.unwrap_or(default_delta),
        k: doc.k.unwrap_or(2.0),
        horizon,
        repeats: doc.repeats.unwrap_or_else(|| profile.repeats()),
        base_seed: doc.base_seed.unwrap_or(0),
        stride,
        output: doc.output,
        instance: doc.instance.unwrap_or_default(),
        concentration: doc.concentration.unwrap_or_default(),
        audit: doc.audit.unwrap_or_default(),
        hard: doc.hard.unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// TOML rendering of a resolved config; parses back to the same value.
pub fn serialize_config(cfg: &ExperimentConfig) -> Result<String> {
    let mut text = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    if cfg.stride.is_none() {
        text.insert_str(0, "full_resolution = true\n");
    }
    Ok(text)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.repeats == 0 {
            return bad("`repeats` must be >= 1".into());
        }
        if self.horizon == 0 {
            return bad("`horizon` must be >= 1".into());
        }
        if self.stride == Some(0) {
            return bad("`stride` must be >= 1".into());
        }
        if self.epsilon.is_empty() || self.alpha.is_empty() {
            return bad("`epsilon` and `alpha` grids must be nonempty".into());
        }
        match self.kind {
            ExperimentKind::RegretCurves | ExperimentKind::HardInstance => {
                if self.algorithms.is_empty() {
                    return bad("`algorithms` must be nonempty".into());
                }
                let instance = self.instance_for(self.alpha[0])?;
                for &alg in &self.algorithms {
                    for &epsilon in &self.epsilon {
                        for &alpha in &self.alpha {
                            let params = RunParams {
                                epsilon,
                                delta: self.delta,
                                alpha,
                                k: self.k,
                                horizon: self.horizon,
                            };
                            if self.kind == ExperimentKind::RegretCurves {
                                self.instance_for(alpha)?;
                            }
                            check_run(alg, &params, &instance).map_err(|e| {
                                Error::Config(format!("{alg} with epsilon = {epsilon}, alpha = {alpha}: {e}"))
                            })?;
                        }
                    }
                }
            }
            ExperimentKind::ConcentrationStudy => {
                let c = &self.concentration;
                if c.estimators.is_empty() || c.sample_sizes.is_empty() {
                    return bad("`concentration.estimators` and `concentration.sample_sizes` must be nonempty".into());
                }
                if c.repetitions == 0 {
                    return bad("`concentration.repetitions` must be >= 1".into());
                }
                if c.mean.abs() > c.mean_range {
                    return bad(format!("`concentration.mean` = {} lies outside the mean range", c.mean));
                }
                for &n in &c.sample_sizes {
                    for &epsilon in &self.epsilon {
                        for &alpha in &self.alpha {
                            for est in &c.estimators {
                                let checked = match est {
                                    StudyEstimator::Raw => {
                                        raw_schedule(n, epsilon, self.delta, self.k, alpha).map(|_| ())
                                    }
                                    StudyEstimator::Central => {
                                        central_schedule(n, epsilon, self.delta, self.k, alpha, c.mean_range)
                                            .map(|_| ())
                                    }
                                };
                                checked.map_err(|e| {
                                    Error::Config(format!(
                                        "{} estimator with n = {n}, epsilon = {epsilon}, alpha = {alpha}: {e}",
                                        est.id()
                                    ))
                                })?;
                            }
                        }
                    }
                }
                self.study_instance(0.0)?;
            }
            ExperimentKind::SensitivityAudit => {
                let a = &self.audit;
                if a.sample_sizes.is_empty() || a.thresholds.is_empty() {
                    return bad("`audit.sample_sizes` and `audit.thresholds` must be nonempty".into());
                }
                if a.sample_sizes.contains(&0) {
                    return bad("`audit.sample_sizes` entries must be >= 1".into());
                }
                if a.trials == 0 {
                    return bad("`audit.trials` must be >= 1".into());
                }
                if let Some(m) = a.thresholds.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
                    return bad(format!("`audit.thresholds` entries must be finite and >= 0, got {m}"));
                }
            }
        }
        Ok(())
    }

    /// Bandit instance for one contamination level.
    pub fn instance_for(&self, alpha: f64) -> Result<BanditInstance> {
        let built = match self.kind {
            ExperimentKind::HardInstance => {
                make_hard_instance(self.instance.arms, self.k, self.hard.gamma, self.hard.variant)
            }
            _ => make_linear_means_instance(
                self.instance.arms,
                self.instance.family,
                alpha,
                Some(self.instance.outlier),
            ),
        };
        built.map_err(|e| Error::Config(format!("instance: {e}")))
    }

    /// Single-arm instance whose inlier has mean `concentration.mean`.
    pub fn study_instance(&self, alpha: f64) -> Result<BanditInstance> {
        use crate::env::{Arm, ContaminationSpec, InlierSpec};
        let mean = self.concentration.mean;
        let inlier = match self.instance.family {
            InlierFamily::Pareto => InlierSpec::pareto_shifted(
                crate::env::BENCHMARK_PARETO_SHAPE,
                crate::env::BENCHMARK_PARETO_SCALE,
                mean - 2.5,
                self.k,
            ),
            InlierFamily::StudentT => InlierSpec::student_t_shifted(crate::env::BENCHMARK_STUDENT_DOF, mean, self.k),
        };
        let contamination = if alpha == 0.0 {
            Ok(ContaminationSpec::clean())
        } else {
            ContaminationSpec::new(alpha, self.instance.outlier)
        };
        let arm = inlier
            .and_then(|inlier| contamination.map(|contamination| Arm { inlier, contamination }))
            .map_err(|e| Error::Config(format!("study distribution: {e}")))?;
        BanditInstance::new(vec![arm], self.concentration.mean_range, "study")
            .map_err(|e| Error::Config(format!("study distribution: {e}")))
    }
}
