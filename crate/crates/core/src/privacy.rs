//! Laplace mechanism, truncated-mean sensitivity and release instrumentation.
//!
//! Every private release in the crate goes through [`NoiseSource::release`],
//! which derives the noise scale as `sensitivity / epsilon` and reports the
//! `(mechanism, sensitivity, scale, epsilon)` tuple to an optional observer.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::estimators::truncated_mean;
use crate::rng::{open01, RngStream};

/// Privacy budget and the confidence level of the accompanying error bounds.
///
/// `delta_conf` is a failure probability for concentration statements, not
/// the delta of approximate DP: every mechanism here is pure epsilon-DP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyParams {
    epsilon: f64,
    delta_conf: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta_conf: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_delta(delta_conf)?;
        Ok(Self { epsilon, delta_conf })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta_conf(&self) -> f64 {
        self.delta_conf
    }
}

/// The `b` of `Lap(b)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LaplaceScale(f64);

impl LaplaceScale {
    pub fn new(scale: f64) -> Result<Self> {
        if scale >= 0.0 && scale.is_finite() {
            Ok(Self(scale))
        } else {
            Err(Error::param(
                "scale",
                format!("Laplace scale must be finite and >= 0, got {scale}"),
            ))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// One draw from the Laplace distribution with density `exp(-|x|/b) / 2b`.
///
/// Uses a single 64-bit word from `rng` (inverse CDF), also when `b = 0`.
pub fn laplace_sample(scale: LaplaceScale, rng: &mut RngStream) -> f64 {
    let u = open01(rng.next_u64()) - 0.5;
    if scale.0 == 0.0 {
        return 0.0;
    }
    -scale.0 * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// l1-sensitivity `2M/n` of the mean of `n` values zeroed outside `[-M, M]`.
pub fn truncated_mean_sensitivity(n: usize, threshold: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "sensitivity is undefined for an empty dataset"));
    }
    check_threshold(threshold)?;
    Ok(2.0 * threshold / n as f64)
}

/// Largest `|truncated_mean(D) - truncated_mean(D')|` seen over `trials`
/// random neighbouring pairs of size `n`.
///
/// Values are drawn from `[-10M, 10M]`, with a quarter of them pinned to
/// `+-M` so the worst case `M -> -M` is actually exercised.
pub fn audit_sensitivity(n: usize, threshold: f64, trials: usize, rng: &mut RngStream) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "need n >= 1"));
    }
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    check_threshold(threshold)?;
    let mut worst = 0.0f64;
    let mut data = vec![0.0; n];
    for _ in 0..trials {
        for x in data.iter_mut() {
            *x = audit_value(threshold, rng);
        }
        let idx = (rng.next_u64() % n as u64) as usize;
        let before = truncated_mean(&data, threshold)?;
        let old = data[idx];
        data[idx] = audit_value(threshold, rng);
        let after = truncated_mean(&data, threshold)?;
        data[idx] = old;
        worst = worst.max((before - after).abs());
    }
    Ok(worst)
}

fn audit_value(threshold: f64, rng: &mut RngStream) -> f64 {
    let u = rng.open01();
    match rng.next_u64() % 8 {
        0 => threshold,
        1 => -threshold,
        _ => threshold * (20.0 * u - 10.0),
    }
}

/// Which statistic a release protects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MechanismId {
    /// Truncated mean around zero (raw-moment estimator, baseline).
    TruncatedMean,
    /// Bin masses of the first-fold histogram.
    Histogram,
    /// Truncated mean around the histogram estimate.
    CenteredTruncatedMean,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReleaseRecord {
    pub mechanism: MechanismId,
    pub sensitivity: f64,
    pub scale: f64,
    pub epsilon: f64,
    /// Set when the release was made in noiseless test mode; `scale` is still the nominal one.
    pub noiseless: bool,
}

/// Receives one record per noisy release.
pub trait ReleaseObserver {
    fn on_release(&mut self, record: &ReleaseRecord);
}

impl ReleaseObserver for Vec<ReleaseRecord> {
    fn on_release(&mut self, record: &ReleaseRecord) {
        self.push(*record);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseMode {
    Laplace,
    /// Adds no noise. Only for deterministic tests; not reachable from configuration.
    Noiseless,
}

/// Noise generator handed to the estimators.
pub struct NoiseSource<'a> {
    rng: &'a mut RngStream,
    mode: NoiseMode,
    observer: Option<&'a mut dyn ReleaseObserver>,
}

impl<'a> NoiseSource<'a> {
    pub fn laplace(rng: &'a mut RngStream) -> Self {
        Self {
            rng,
            mode: NoiseMode::Laplace,
            observer: None,
        }
    }

    pub fn noiseless(rng: &'a mut RngStream) -> Self {
        Self {
            rng,
            mode: NoiseMode::Noiseless,
            observer: None,
        }
    }

    pub fn with_mode(rng: &'a mut RngStream, mode: NoiseMode) -> Self {
        Self {
            rng,
            mode,
            observer: None,
        }
    }

    pub fn observed(mut self, observer: &'a mut dyn ReleaseObserver) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    /// Scale `sensitivity / epsilon` for a release, reported to the observer.
    pub fn announce(&mut self, mechanism: MechanismId, sensitivity: f64, epsilon: f64) -> Result<LaplaceScale> {
        check_epsilon(epsilon)?;
        let scale = LaplaceScale::new(sensitivity / epsilon)?;
        if let Some(obs) = self.observer.as_deref_mut() {
            obs.on_release(&ReleaseRecord {
                mechanism,
                sensitivity,
                scale: scale.get(),
                epsilon,
                noiseless: self.mode == NoiseMode::Noiseless,
            });
        }
        Ok(scale)
    }

    /// One noise draw at an already announced scale.
    pub fn draw(&mut self, scale: LaplaceScale) -> f64 {
        let effective = match self.mode {
            NoiseMode::Laplace => scale,
            NoiseMode::Noiseless => LaplaceScale(0.0),
        };
        laplace_sample(effective, self.rng)
    }

    /// `value + Lap(sensitivity / epsilon)`.
    pub fn release(&mut self, mechanism: MechanismId, value: f64, sensitivity: f64, epsilon: f64) -> Result<f64> {
        let scale = self.announce(mechanism, sensitivity, epsilon)?;
        Ok(value + self.draw(scale))
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "epsilon",
            format!("must be finite and > 0, got {epsilon}"),
        ))
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")))
    }
}

pub(crate) fn check_threshold(threshold: f64) -> Result<()> {
    if threshold >= 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "threshold",
            format!("truncation threshold must be finite and >= 0, got {threshold}"),
        ))
    }
}
