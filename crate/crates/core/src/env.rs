//! Reward environments: heavy-tailed inliers mixed with Huber outliers.
//!
//! Every call to [`BanditInstance::sample_reward`] consumes exactly two
//! 64-bit words from the caller's stream: one for the contamination coin and
//! one key for the chosen component. Components that need rejection sampling
//! expand the key into a private generator, so the caller's stream position
//! never depends on how many rejections happened.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{open01, RngStream};

/// Shape of an inlier reward distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InlierKind {
    /// `shift + X` with `X ~ Pareto(shape, scale)`, density `s x_m^s / x^(s+1)` on `x >= x_m`.
    ParetoShifted {
        shape: f64,
        scale: f64,
        shift: f64,
    },
    /// `shift + X` with `X` Student's t with `dof` degrees of freedom.
    StudentTShifted {
        dof: f64,
        shift: f64,
    },
    /// `high` with probability `p_high`, otherwise 0.
    TwoPoint {
        high: f64,
        p_high: f64,
    },
    PointMass {
        value: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InlierSpec {
    kind: InlierKind,
    mean: f64,
    moment_order: f64,
}

impl InlierSpec {
    pub fn pareto_shifted(shape: f64, scale: f64, shift: f64, moment_order: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 1.0) {
            return Err(Error::param(
                "shape",
                format!("Pareto needs shape > 1 for a finite mean, got {shape}"),
            ));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::param("scale", format!("must be positive, got {scale}")));
        }
        check_finite("shift", shift)?;
        let mean = shift + shape * scale / (shape - 1.0);
        Self::build(InlierKind::ParetoShifted { shape, scale, shift }, mean, moment_order)
    }

    pub fn student_t_shifted(dof: f64, shift: f64, moment_order: f64) -> Result<Self> {
        if !(dof.is_finite() && dof > 2.0) {
            return Err(Error::param(
                "dof",
                format!("Student's t needs dof > 2 for a finite variance, got {dof}"),
            ));
        }
        check_finite("shift", shift)?;
        Self::build(InlierKind::StudentTShifted { dof, shift }, shift, moment_order)
    }

    pub fn two_point(high: f64, p_high: f64, moment_order: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_high) {
            return Err(Error::param("p_high", format!("must lie in [0, 1], got {p_high}")));
        }
        if !(high.is_finite() && high >= 0.0) {
            return Err(Error::param("high", format!("must be finite and >= 0, got {high}")));
        }
        Self::build(InlierKind::TwoPoint { high, p_high }, high * p_high, moment_order)
    }

    pub fn point_mass(value: f64, moment_order: f64) -> Result<Self> {
        check_finite("value", value)?;
        Self::build(InlierKind::PointMass { value }, value, moment_order)
    }

    fn build(kind: InlierKind, mean: f64, moment_order: f64) -> Result<Self> {
        check_moment_order(moment_order)?;
        Ok(Self {
            kind,
            mean,
            moment_order,
        })
    }

    pub fn kind(&self) -> InlierKind {
        self.kind
    }

    /// Analytic mean of the distribution.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn moment_order(&self) -> f64 {
        self.moment_order
    }

    fn sample_from_key(&self, key: u64) -> f64 {
        match self.kind {
            InlierKind::PointMass { value } => value,
            InlierKind::TwoPoint { high, p_high } => {
                if open01(key) < p_high {
                    high
                } else {
                    0.0
                }
            }
            InlierKind::ParetoShifted { shape, scale, shift } => shift + scale * open01(key).powf(-1.0 / shape),
            InlierKind::StudentTShifted { dof, shift } => {
                let mut local = ChaCha8Rng::seed_from_u64(key);
                // dof > 2 was checked at construction.
                shift + StudentT::new(dof).expect("valid dof").sample(&mut local)
            }
        }
    }
}

/// Outlier component of the Huber mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Outlier {
    Gaussian { mean: f64, std: f64 },
    PointMass { value: f64 },
    None,
}

impl Outlier {
    /// The Gaussian(0, 50) outlier used by the benchmark instances.
    pub const BENCHMARK: Outlier = Outlier::Gaussian { mean: 0.0, std: 50.0 };

    fn validate(&self) -> Result<()> {
        match *self {
            Outlier::Gaussian { mean, std } => {
                check_finite("outlier.mean", mean)?;
                if !(std.is_finite() && std >= 0.0) {
                    return Err(Error::param(
                        "outlier.std",
                        format!("must be finite and >= 0, got {std}"),
                    ));
                }
                Ok(())
            }
            Outlier::PointMass { value } => check_finite("outlier.value", value),
            Outlier::None => Ok(()),
        }
    }

    fn sample_from_key(&self, key: u64) -> f64 {
        match *self {
            Outlier::Gaussian { mean, std } => {
                let mut local = ChaCha8Rng::seed_from_u64(key);
                Normal::new(mean, std).expect("validated std").sample(&mut local)
            }
            Outlier::PointMass { value } => value,
            // Only reachable with alpha = 0, where the coin never selects the outlier.
            Outlier::None => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContaminationSpec {
    alpha: f64,
    outlier: Outlier,
}

impl ContaminationSpec {
    pub fn new(alpha: f64, outlier: Outlier) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        if alpha > 0.0 && outlier == Outlier::None {
            return Err(Error::param(
                "outlier",
                "an outlier distribution is required when alpha > 0",
            ));
        }
        outlier.validate()?;
        Ok(Self { alpha, outlier })
    }

    pub fn clean() -> Self {
        Self {
            alpha: 0.0,
            outlier: Outlier::None,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn outlier(&self) -> Outlier {
        self.outlier
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arm {
    pub inlier: InlierSpec,
    pub contamination: ContaminationSpec,
}

/// One observed reward together with the component it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Draw {
    pub value: f64,
    pub contaminated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BanditInstance {
    arms: Vec<Arm>,
    true_means: Vec<f64>,
    optimal_mean: f64,
    mean_range: f64,
    label: String,
}

impl BanditInstance {
    /// Builds an instance; `mean_range` is the bound `D` with every `|mu_a| <= D`.
    pub fn new(arms: Vec<Arm>, mean_range: f64, label: impl Into<String>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::param("arms", "an instance needs at least one arm"));
        }
        if !(mean_range.is_finite() && mean_range >= 0.0) {
            return Err(Error::param(
                "mean_range",
                format!("must be finite and >= 0, got {mean_range}"),
            ));
        }
        let true_means: Vec<f64> = arms.iter().map(|a| a.inlier.mean()).collect();
        if let Some(m) = true_means.iter().find(|m| m.abs() > mean_range) {
            return Err(Error::param(
                "mean_range",
                format!("arm mean {m} lies outside [-{mean_range}, {mean_range}]"),
            ));
        }
        let optimal_mean = true_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            arms,
            true_means,
            optimal_mean,
            mean_range,
            label: label.into(),
        })
    }

    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn true_means(&self) -> &[f64] {
        &self.true_means
    }

    pub fn optimal_mean(&self) -> f64 {
        self.optimal_mean
    }

    /// Smallest index attaining the optimal mean.
    pub fn optimal_arm(&self) -> usize {
        self.true_means
            .iter()
            .position(|&m| m == self.optimal_mean)
            .expect("instance is nonempty")
    }

    pub fn mean_range(&self) -> f64 {
        self.mean_range
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn gap(&self, arm: usize) -> Result<f64> {
        self.check_arm(arm)?;
        Ok(self.optimal_mean - self.true_means[arm])
    }

    pub fn check_arm(&self, arm: usize) -> Result<()> {
        if arm < self.arms.len() {
            Ok(())
        } else {
            Err(Error::ArmOutOfRange {
                arm,
                count: self.arms.len(),
            })
        }
    }

    /// One contaminated reward from `arm`.
    pub fn sample_reward(&self, arm: usize, rng: &mut RngStream) -> Result<f64> {
        self.draw(arm, rng).map(|d| d.value)
    }

    /// Like [`sample_reward`](Self::sample_reward) but also reports whether
    /// the outlier component produced the value.
    pub fn draw(&self, arm: usize, rng: &mut RngStream) -> Result<Draw> {
        self.check_arm(arm)?;
        let spec = &self.arms[arm];
        let coin = open01(rng.next_u64());
        let key = rng.next_u64();
        let contaminated = coin < spec.contamination.alpha;
        let value = if contaminated {
            spec.contamination.outlier.sample_from_key(key)
        } else {
            spec.inlier.sample_from_key(key)
        };
        Ok(Draw { value, contaminated })
    }
}

/// Inlier family of the linear-means benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InlierFamily {
    Pareto,
    StudentT,
}

pub const BENCHMARK_PARETO_SHAPE: f64 = 2.5;
pub const BENCHMARK_PARETO_SCALE: f64 = 1.5;
pub const BENCHMARK_STUDENT_DOF: f64 = 2.5;
/// Arm means live in [0, 100]; housed symmetrically as `D = 100`.
pub const BENCHMARK_MEAN_RANGE: f64 = 100.0;

/// Arm means `mu_a = 100 - 100 a / (K - 1)` for 0-based `a`, descending from 100 to 0.
pub fn linear_means(arm_count: usize) -> Result<Vec<f64>> {
    if arm_count < 2 {
        return Err(Error::param(
            "arm_count",
            format!("the linear schedule needs K >= 2, got {arm_count}"),
        ));
    }
    let last = (arm_count - 1) as f64;
    Ok((0..arm_count).map(|a| 100.0 - 100.0 * a as f64 / last).collect())
}

/// The benchmark instance with linearly descending means.
///
/// Pareto arms are `mu_a - 2.5 + Pareto(2.5, 1.5)`; Student's t arms are
/// `mu_a + t(2.5)`. `outlier = None` selects the Gaussian(0, 50) default.
pub fn make_linear_means_instance(
    arm_count: usize,
    family: InlierFamily,
    alpha: f64,
    outlier: Option<Outlier>,
) -> Result<BanditInstance> {
    let means = linear_means(arm_count)?;
    let outlier = outlier.unwrap_or(Outlier::BENCHMARK);
    let contamination = if alpha == 0.0 && outlier == Outlier::None {
        ContaminationSpec::clean()
    } else {
        ContaminationSpec::new(alpha, outlier)?
    };
    let arms = means
        .iter()
        .map(|&mu| {
            let inlier = match family {
                InlierFamily::Pareto => {
                    InlierSpec::pareto_shifted(BENCHMARK_PARETO_SHAPE, BENCHMARK_PARETO_SCALE, mu - 2.5, 2.0)?
                }
                InlierFamily::StudentT => InlierSpec::student_t_shifted(BENCHMARK_STUDENT_DOF, mu, 2.0)?,
            };
            Ok(Arm { inlier, contamination })
        })
        .collect::<Result<Vec<_>>>()?;
    let label = match family {
        InlierFamily::Pareto => format!("linear-pareto-K{arm_count}"),
        InlierFamily::StudentT => format!("linear-student-t-K{arm_count}"),
    };
    BanditInstance::new(arms, BENCHMARK_MEAN_RANGE, label)
}

/// Lower-bound instances built from two-point rewards on `{0, 1/gamma}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arm", rename_all = "snake_case")]
pub enum HardVariant {
    /// Arm 0 is best with `P(1/gamma) = gamma^k / 2`, the rest use `3 gamma^k / 10`.
    Nu1,
    /// As `Nu1`, except the given (0-based, nonzero) arm uses `7 gamma^k / 10`.
    Nu2(usize),
}

pub fn make_hard_instance(
    arm_count: usize,
    moment_order: f64,
    gamma: f64,
    variant: HardVariant,
) -> Result<BanditInstance> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param("gamma", format!("must lie in (0, 1], got {gamma}")));
    }
    check_moment_order(moment_order)?;
    if arm_count == 0 {
        return Err(Error::param("arm_count", "need at least one arm"));
    }
    let boosted = match variant {
        HardVariant::Nu1 => None,
        HardVariant::Nu2(i) => {
            if i == 0 {
                return Err(Error::param("variant", "Nu2 must boost a non-optimal arm (index != 0)"));
            }
            if i >= arm_count {
                return Err(Error::ArmOutOfRange {
                    arm: i,
                    count: arm_count,
                });
            }
            Some(i)
        }
    };
    let gk = gamma.powf(moment_order);
    let high = 1.0 / gamma;
    let arms = (0..arm_count)
        .map(|a| {
            let p = if a == 0 {
                0.5 * gk
            } else if Some(a) == boosted {
                0.7 * gk
            } else {
                0.3 * gk
            };
            Ok(Arm {
                inlier: InlierSpec::two_point(high, p, moment_order)?,
                contamination: ContaminationSpec::clean(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // k-th raw moment is at most 7/10, so every mean lies in [-1, 1].
    let label = match variant {
        HardVariant::Nu1 => format!("hard-nu1-K{arm_count}-g{gamma}-k{moment_order}"),
        HardVariant::Nu2(i) => format!("hard-nu2-{i}-K{arm_count}-g{gamma}-k{moment_order}"),
    };
    BanditInstance::new(arms, 1.0, label)
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {v}")))
    }
}

fn check_moment_order(k: f64) -> Result<()> {
    if k >= 2.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::param("k", format!("moment order must be >= 2, got {k}")))
    }
}
