//! Private robust mean estimators and their parameter schedules.
//!
//! Two estimators are provided:
//!
//! - [`prm_raw`] zeroes every sample outside `[-M, M]`, averages, and adds
//!   `Lap(2M / (n eps))`. It is suited to inliers with a bounded k-th raw moment.
//! - [`prm_central`] splits `2n` samples into two folds. The first fold feeds
//!   a private histogram whose heaviest bin gives a coarse location `J`; the
//!   second fold is truncated around `J` and released with Laplace noise. It
//!   handles means anywhere in `[-D, D]` under a bounded k-th central moment.
//!
//! All logarithms are natural. Constants are fixed to the values used in the
//! corresponding error bounds (4, 8, 16, 200, `10^(1/k)`, 0.249).

use crate::error::{Error, Result};
use crate::privacy::{check_delta, check_epsilon, check_threshold, MechanismId, NoiseSource};

/// Contamination level at which the central estimator's guarantee breaks down.
pub const CENTRAL_BREAKDOWN_ALPHA: f64 = 0.133;
/// Upper end of the contamination range accepted by the raw estimator.
pub const RAW_MAX_ALPHA: f64 = 0.5;
/// Multiplier of the central-moment confidence radius.
pub const CENTRAL_RADIUS_CONSTANT: f64 = 8.0;
/// Multiplier of `ln(16D/delta)/eps` in the central minimum sample size.
pub const CENTRAL_MIN_N_CONSTANT: f64 = 200.0;
/// Largest histogram the central estimator will allocate.
pub const MAX_HISTOGRAM_BINS: usize = 1 << 24;

/// A released estimate with the radius it is claimed to be accurate to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub radius: f64,
    pub n_used: usize,
}

/// `(1/n) sum x_i 1{|x_i| <= M}`. Samples beyond the threshold are zeroed, not clamped.
pub fn truncated_mean(data: &[f64], threshold: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    check_threshold(threshold)?;
    let sum: f64 = data.iter().filter(|x| x.abs() <= threshold).sum();
    Ok(sum / data.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrmRawParams {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub k: f64,
    pub alpha: f64,
    /// Truncation threshold `M`.
    pub threshold: f64,
    /// Confidence radius `beta`.
    pub radius: f64,
    /// Smallest `n` for which the contaminated bound applies; 1 when `alpha = 0`.
    pub min_n: u64,
}

/// Threshold and radius of the raw-moment estimator for `n` samples.
///
/// Clean data: `M = (n eps / (4 ln(4/delta)))^(1/k)` and
/// `beta = sqrt(2 ln(4/delta) / n) + 2 (4 ln(4/delta) / (n eps))^(1-1/k)`.
///
/// Contaminated data: `M = min{(n eps / (4 ln(16/delta)))^(1/k), (8 alpha)^(-1/k)}` and
/// `beta = sqrt(2 ln(16/delta) / n) + 2 (4 ln(16/delta) / (n eps))^(1-1/k) + 2 (8 alpha)^(1-1/k)`,
/// valid once `n >= ln(8/delta) / alpha`.
pub fn raw_schedule(n: usize, epsilon: f64, delta: f64, k: f64, alpha: f64) -> Result<PrmRawParams> {
    if n == 0 {
        return Err(Error::param("n", "need at least one sample"));
    }
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    check_k(k)?;
    if !(0.0..=RAW_MAX_ALPHA).contains(&alpha) {
        return Err(Error::param(
            "alpha",
            format!("raw estimator accepts alpha in [0, 0.5], got {alpha}"),
        ));
    }
    let nf = n as f64;
    let tail = 1.0 - 1.0 / k;
    let (threshold, radius, min_n) = if alpha == 0.0 {
        let l = (4.0 / delta).ln();
        let m = (nf * epsilon / (4.0 * l)).powf(1.0 / k);
        let beta = (2.0 * l / nf).sqrt() + 2.0 * (4.0 * l / (nf * epsilon)).powf(tail);
        (m, beta, 1)
    } else {
        let l = (16.0 / delta).ln();
        let m = (nf * epsilon / (4.0 * l))
            .powf(1.0 / k)
            .min((8.0 * alpha).powf(-1.0 / k));
        let beta = (2.0 * l / nf).sqrt() + 2.0 * (4.0 * l / (nf * epsilon)).powf(tail) + 2.0 * (8.0 * alpha).powf(tail);
        (m, beta, ceil_count((8.0 / delta).ln() / alpha))
    };
    Ok(PrmRawParams {
        n,
        epsilon,
        delta,
        k,
        alpha,
        threshold,
        radius,
        min_n,
    })
}

/// Raw-moment estimator: truncated mean plus `Lap(2M / (n eps))`.
pub fn prm_raw(data: &[f64], params: &PrmRawParams, noise: &mut NoiseSource<'_>) -> Result<Estimate> {
    if data.len() != params.n {
        return Err(Error::LengthMismatch {
            expected: params.n,
            actual: data.len(),
        });
    }
    let mean = truncated_mean(data, params.threshold)?;
    let sensitivity = 2.0 * params.threshold / params.n as f64;
    let value = noise.release(MechanismId::TruncatedMean, mean, sensitivity, params.epsilon)?;
    Ok(Estimate {
        value,
        radius: params.radius,
        n_used: params.n,
    })
}

/// Bin layout `B_j = [j, j + r)` for `j` in `{-D, -D + r, ...}` up to `D - r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinGrid {
    pub width: f64,
    pub range: f64,
    pub count: usize,
}

impl BinGrid {
    pub fn new(width: f64, range: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::param(
                "r",
                format!("bin width must be finite and > 0, got {width}"),
            ));
        }
        if !(range.is_finite() && range >= 2.0 * width) {
            return Err(Error::param("D", format!("need D >= 2r, got D = {range}, r = {width}")));
        }
        // Left edges -D + m r <= D - r, with slack for grids where r divides 2D.
        let ratio = 2.0 * range / width;
        let count = (ratio * (1.0 + 1e-12)).floor();
        if count > MAX_HISTOGRAM_BINS as f64 {
            return Err(Error::param(
                "D",
                format!("D / r = {} exceeds the bin cap", range / width),
            ));
        }
        Ok(Self {
            width,
            range,
            count: count as usize,
        })
    }

    pub fn left_edge(&self, bin: usize) -> f64 {
        -self.range + bin as f64 * self.width
    }

    /// Bin holding `x`, or `None` outside the covered span.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let m = ((x + self.range) / self.width).floor();
        if m >= 0.0 && m < self.count as f64 {
            Some(m as usize)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrivateHistogram {
    /// Left edge `J` of the heaviest noisy bin.
    pub location: f64,
    pub noisy_masses: Vec<f64>,
}

/// Noisy bin frequencies `count_j / n + Lap(2 / (n eps))` and the left edge
/// of the heaviest bin (ties go to the lowest bin). Points outside the grid
/// count toward `n` but toward no bin.
pub fn private_histogram(
    data: &[f64],
    width: f64,
    range: f64,
    epsilon: f64,
    noise: &mut NoiseSource<'_>,
) -> Result<PrivateHistogram> {
    let grid = BinGrid::new(width, range)?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = data.len() as f64;
    let mut counts = vec![0u64; grid.count];
    for &x in data {
        if let Some(b) = grid.bin_of(x) {
            counts[b] += 1;
        }
    }
    let scale = noise.announce(MechanismId::Histogram, 2.0 / n, epsilon)?;
    let noisy_masses: Vec<f64> = counts.iter().map(|&c| c as f64 / n + noise.draw(scale)).collect();
    let mut best = 0;
    for (j, &p) in noisy_masses.iter().enumerate() {
        if p > noisy_masses[best] {
            best = j;
        }
    }
    Ok(PrivateHistogram {
        location: grid.left_edge(best),
        noisy_masses,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrmCentralParams {
    /// Samples per fold; the estimator reads `2n`.
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub k: f64,
    pub alpha: f64,
    /// Mean range `D`.
    pub range: f64,
    /// Bin width `r`.
    pub bin_width: f64,
    /// Truncation threshold `M` around the histogram location.
    pub threshold: f64,
    pub radius: f64,
    /// Per-fold sample size from which the bound applies.
    pub min_n: u64,
}

/// `iota = (1 - alpha) / (0.249 - alpha)`, the contaminated bin-width exponent base.
pub fn central_iota(alpha: f64) -> f64 {
    (1.0 - alpha) / (0.249 - alpha)
}

/// Parameters of the central-moment estimator with `n` samples per fold.
///
/// Clean data: `r = 10^(1/k)`, `M = 4 (n eps / ln(1/delta))^(1/k)`,
/// `min_n = ceil(200 ln(16D/delta) / eps)`.
///
/// Contaminated data (`0 < alpha < 0.133`): `r = iota^(1/k)`,
/// `M = min{4 (n eps / ln(1/delta))^(1/k), 4 alpha^(-1/k)}` and
/// `min_n = ceil(max{iota ln(1/delta)/eps, 200 ln(16D/delta)/eps, ln(16/delta)/alpha^2})`.
///
/// The radius is `8 (sqrt(ln(1/delta)/n) + (ln(1/delta)/(n eps))^(1-1/k))`,
/// plus `8 alpha^(1-1/k)` under contamination.
pub fn central_schedule(
    n: usize,
    epsilon: f64,
    delta: f64,
    k: f64,
    alpha: f64,
    range: f64,
) -> Result<PrmCentralParams> {
    if n == 0 {
        return Err(Error::param("n", "need at least one sample per fold"));
    }
    check_epsilon(epsilon)?;
    if epsilon > 1.0 {
        return Err(Error::param(
            "epsilon",
            format!("central estimator requires eps in (0, 1], got {epsilon}"),
        ));
    }
    check_delta(delta)?;
    check_k(k)?;
    if alpha >= CENTRAL_BREAKDOWN_ALPHA {
        return Err(Error::Breakdown {
            alpha,
            limit: CENTRAL_BREAKDOWN_ALPHA,
        });
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::param("alpha", format!("must be >= 0, got {alpha}")));
    }
    let nf = n as f64;
    let l = (1.0 / delta).ln();
    let tail = 1.0 - 1.0 / k;
    let m_privacy = 4.0 * (nf * epsilon / l).powf(1.0 / k);
    let base_radius = CENTRAL_RADIUS_CONSTANT * ((l / nf).sqrt() + (l / (nf * epsilon)).powf(tail));
    let range_term = CENTRAL_MIN_N_CONSTANT * (16.0 * range / delta).ln() / epsilon;

    let (bin_width, threshold, radius, min_n) = if alpha == 0.0 {
        (10f64.powf(1.0 / k), m_privacy, base_radius, range_term)
    } else {
        let iota = central_iota(alpha);
        let min_n = (iota * l / epsilon)
            .max(range_term)
            .max((16.0 / delta).ln() / (alpha * alpha));
        (
            iota.powf(1.0 / k),
            m_privacy.min(4.0 * alpha.powf(-1.0 / k)),
            base_radius + CENTRAL_RADIUS_CONSTANT * alpha.powf(tail),
            min_n,
        )
    };
    if range.is_nan() || range < 2.0 * bin_width {
        return Err(Error::param(
            "D",
            format!("need D >= 2r, got D = {range}, r = {bin_width}"),
        ));
    }
    Ok(PrmCentralParams {
        n,
        epsilon,
        delta,
        k,
        alpha,
        range,
        bin_width,
        threshold,
        radius,
        min_n: ceil_count(min_n),
    })
}

/// Central-moment estimator over `2n` samples: histogram location from the
/// first fold, truncated mean around it from the second.
pub fn prm_central(data: &[f64], params: &PrmCentralParams, noise: &mut NoiseSource<'_>) -> Result<Estimate> {
    if !data.len().is_multiple_of(2) {
        return Err(Error::param(
            "data",
            format!("central estimator needs an even sample count, got {}", data.len()),
        ));
    }
    if data.len() != 2 * params.n {
        return Err(Error::LengthMismatch {
            expected: 2 * params.n,
            actual: data.len(),
        });
    }
    let (first, second) = data.split_at(params.n);
    let hist = private_histogram(first, params.bin_width, params.range, params.epsilon, noise)?;
    let j = hist.location;
    let m = params.threshold;
    let shifted: f64 = second.iter().map(|x| x - j).filter(|d| d.abs() <= m).sum();
    let centered = j + shifted / params.n as f64;
    let value = noise.release(
        MechanismId::CenteredTruncatedMean,
        centered,
        2.0 * m / params.n as f64,
        params.epsilon,
    )?;
    Ok(Estimate {
        value,
        radius: params.radius,
        n_used: 2 * params.n,
    })
}

fn check_k(k: f64) -> Result<()> {
    if k >= 2.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::param("k", format!("moment order must be >= 2, got {k}")))
    }
}

fn ceil_count(x: f64) -> u64 {
    if x <= 1.0 {
        1
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn truncated_mean_examples() {
        let v = truncated_mean(&[0.5, -2.0, 3.0], 1.0).unwrap();
        assert!((v - 0.5 / 3.0).abs() < 1e-15);
        assert_eq!(truncated_mean(&[7.0, -7.0], 10.0).unwrap(), 0.0);
        assert!(matches!(truncated_mean(&[], 1.0), Err(Error::EmptyData)));
        assert!(truncated_mean(&[1.0], -1.0).is_err());
        // Boundary is inclusive.
        assert_eq!(truncated_mean(&[2.0, -2.0, 2.0], 2.0).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn raw_schedule_threshold() {
        let p = raw_schedule(1024, 1.0, 0.01, 2.0, 0.0).unwrap();
        let expected = (1024.0 / (4.0 * 400f64.ln())).sqrt();
        assert!((p.threshold - expected).abs() < 1e-12);
        assert!((p.threshold - 6.537).abs() < 1e-3);
        assert_eq!(p.min_n, 1);
    }

    #[test]
    fn raw_schedule_contaminated_min_n() {
        let p = raw_schedule(10_000, 1.0, 0.05, 2.0, 0.05).unwrap();
        assert_eq!(p.min_n, 102);
        assert!((p.threshold - 0.4f64.powf(-0.5)).abs() < 1e-12);
        let bias = 2.0 * 0.4f64.sqrt();
        assert!(p.radius > bias);
    }

    #[test]
    fn raw_schedule_domain() {
        assert!(raw_schedule(0, 1.0, 0.1, 2.0, 0.0).is_err());
        assert!(raw_schedule(10, 0.0, 0.1, 2.0, 0.0).is_err());
        assert!(raw_schedule(10, 1.0, 1.0, 2.0, 0.0).is_err());
        assert!(raw_schedule(10, 1.0, 0.1, 1.5, 0.0).is_err());
        assert!(raw_schedule(10, 1.0, 0.1, 2.0, 0.6).is_err());
        assert!(raw_schedule(10, 1.0, 0.1, 2.0, 0.5).is_ok());
    }

    #[test]
    fn prm_raw_noiseless_is_truncated_mean() {
        let mut rng = RngStream::new(0, 0);
        let p = raw_schedule(4, 1.0, 0.1, 2.0, 0.0).unwrap();
        let est = prm_raw(&[0.0; 4], &p, &mut NoiseSource::noiseless(&mut rng)).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.radius, p.radius);
        let c = p.threshold / 2.0;
        let est = prm_raw(&[c; 4], &p, &mut NoiseSource::noiseless(&mut rng)).unwrap();
        assert!((est.value - c).abs() < 1e-15);
        assert!(matches!(
            prm_raw(&[0.0; 3], &p, &mut NoiseSource::noiseless(&mut rng)),
            Err(Error::LengthMismatch { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn histogram_binning() {
        let grid = BinGrid::new(1.0, 5.0).unwrap();
        assert_eq!(grid.count, 10);
        assert_eq!(grid.bin_of(3.2).map(|b| grid.left_edge(b)), Some(3.0));
        assert_eq!(grid.bin_of(-5.0), Some(0));
        assert_eq!(grid.bin_of(5.0), None);
        assert_eq!(grid.bin_of(-5.1), None);
        assert!(BinGrid::new(1.0, 1.5).is_err());

        let mut rng = RngStream::new(0, 0);
        let h = private_histogram(&[0.1; 20], 1.0, 5.0, 1.0, &mut NoiseSource::noiseless(&mut rng)).unwrap();
        assert_eq!(h.location, 0.0);
        assert_eq!(h.noisy_masses[5], 1.0);
    }

    #[test]
    fn histogram_ties_break_low_and_drops_outside() {
        let mut rng = RngStream::new(0, 0);
        let h = private_histogram(&[2.5, -3.5, 50.0], 1.0, 5.0, 1.0, &mut NoiseSource::noiseless(&mut rng)).unwrap();
        assert_eq!(h.location, -4.0);
        let total: f64 = h.noisy_masses.iter().sum();
        assert!((total - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn central_schedule_examples() {
        let p = central_schedule(1000, 1.0, 0.05, 2.0, 0.0, 100.0).unwrap();
        assert!((p.bin_width - 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(p.min_n, (200.0 * (1600.0f64 / 0.05).ln()).ceil() as u64);

        let p = central_schedule(1000, 1.0, 0.05, 2.0, 0.1, 100.0).unwrap();
        assert!((central_iota(0.1) - 0.9 / 0.149).abs() < 1e-12);
        assert!((p.bin_width - 2.458).abs() < 1e-3);

        assert!(matches!(
            central_schedule(1000, 1.0, 0.05, 2.0, 0.2, 100.0),
            Err(Error::Breakdown { .. })
        ));
        assert!(central_schedule(1000, 1.0, 0.05, 2.0, 0.133, 100.0).is_err());
        assert!(central_schedule(1000, 1.5, 0.05, 2.0, 0.0, 100.0).is_err());
        assert!(central_schedule(1000, 1.0, 0.05, 2.0, 0.0, 5.0).is_err());
    }

    #[test]
    fn central_threshold_clears_four_bins_past_min_n() {
        for alpha in [0.0, 0.01, 0.05, 0.1, 0.13] {
            for k in [2.0, 3.0, 4.0] {
                let probe = central_schedule(1, 1.0, 0.01, k, alpha, 100.0).unwrap();
                let p = central_schedule(probe.min_n as usize, 1.0, 0.01, k, alpha, 100.0).unwrap();
                assert!(p.threshold >= 4.0 * p.bin_width, "alpha {alpha} k {k}");
            }
        }
    }

    #[test]
    fn prm_central_point_mass_and_far_fold() {
        let p = central_schedule(50, 1.0, 0.05, 2.0, 0.0, 100.0).unwrap();
        let mut rng = RngStream::new(0, 0);
        let c = 37.3;
        let est = prm_central(&[c; 100], &p, &mut NoiseSource::noiseless(&mut rng)).unwrap();
        assert!((est.value - c).abs() < 1e-12);
        assert_eq!(est.n_used, 100);

        let mut data = vec![0.5; 50];
        data.extend(std::iter::repeat_n(0.5 + 10.0 * p.threshold, 50));
        let est = prm_central(&data, &p, &mut NoiseSource::noiseless(&mut rng)).unwrap();
        let grid = BinGrid::new(p.bin_width, 100.0).unwrap();
        assert_eq!(est.value, grid.left_edge(grid.bin_of(0.5).unwrap()));

        assert!(prm_central(&[0.0; 99], &p, &mut NoiseSource::noiseless(&mut rng)).is_err());
        assert!(matches!(
            prm_central(&[0.0; 98], &p, &mut NoiseSource::noiseless(&mut rng)),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
