//! Streaming robust mean estimation with confidence radii that only assume a
//! bounded (1+eps)-th moment.
//!
//! Three estimators share one accumulator type:
//!
//! * `Empirical` keeps a running sum. Its radius is the sub-Gaussian
//!   `sqrt(log(1/delta) / 2n)` scaled by a range factor, which is only
//!   correct for bounded rewards; baselines use it.
//! * `Truncated` zeroes the t-th sample when `|x| > B_t` with
//!   `B_t = (u t / log(1/delta))^(1/(1+eps))`, evaluated at insertion time so
//!   the estimator stays O(1) in memory.
//! * `MedianOfMeans` stores every sample and returns the median of block
//!   means.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("no samples")]
    NoSamples,
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("eps must lie in (0, 1], got {0}")]
    InvalidEps(f64),
    #[error("moment bound must be positive and finite, got {0}")]
    InvalidMoment(f64),
    #[error("confidence scale must lie in (0, 1], got {0}")]
    InvalidScale(f64),
    #[error("non-finite sample {0}")]
    NonFiniteSample(f64),
    #[error("block count must be at least 1")]
    InvalidBlockCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Empirical,
    Truncated,
    MedianOfMeans,
}

impl EstimatorKind {
    /// Constant `c` in the robust deviation bound
    /// `m^(1/(1+eps)) (c log(1/delta) / n)^(eps/(1+eps))`.
    ///
    /// `4^((1+eps)/eps)` for the truncated mean and `32 * 12^(1/eps)` for
    /// median-of-means. The empirical mean has no such constant.
    pub fn robust_constant(self, eps: f64) -> Option<f64> {
        match self {
            EstimatorKind::Empirical => None,
            EstimatorKind::Truncated => Some(4f64.powf((1.0 + eps) / eps)),
            EstimatorKind::MedianOfMeans => Some(32.0 * 12f64.powf(1.0 / eps)),
        }
    }
}

/// Truncation threshold `B_t = (u t / log(1/delta))^(1/(1+eps))` for the t-th sample.
pub fn trunc_threshold(u: f64, eps: f64, t: u64, delta: f64) -> Result<f64, EstimatorError> {
    check_delta(delta)?;
    check_eps(eps)?;
    if !(u > 0.0 && u.is_finite()) {
        return Err(EstimatorError::InvalidMoment(u));
    }
    Ok(threshold_unchecked(u, eps, t.max(1) as f64, (1.0 / delta).ln()))
}

#[inline]
pub(crate) fn threshold_unchecked(u: f64, eps: f64, t: f64, log_inv_delta: f64) -> f64 {
    (u * t / log_inv_delta).powf(1.0 / (1.0 + eps))
}

/// `scale * m^(1/(1+eps)) * (c * log(1/delta) / n)^(eps/(1+eps))`.
pub fn robust_radius(moment: f64, eps: f64, c: f64, delta: f64, n: u64, conf_scale: f64) -> f64 {
    let log_term = c * (1.0 / delta).ln() / n as f64;
    conf_scale * moment.powf(1.0 / (1.0 + eps)) * log_term.powf(eps / (1.0 + eps))
}

fn check_delta(delta: f64) -> Result<(), EstimatorError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(EstimatorError::InvalidDelta(delta))
    }
}

fn check_eps(eps: f64) -> Result<(), EstimatorError> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(EstimatorError::InvalidEps(eps))
    }
}

/// Parameters shared by every accumulator of one learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorParams {
    pub kind: EstimatorKind,
    pub eps: f64,
    /// Raw moment bound `u`, drives the truncated estimator.
    pub u: f64,
    /// Centred moment bound `v`, drives median-of-means.
    pub v: f64,
    pub delta: f64,
    pub conf_scale: f64,
    /// Reward range used by the sub-Gaussian radius of the empirical kind.
    pub range: f64,
    /// Forces the median-of-means block count instead of deriving it from delta.
    pub blocks: Option<usize>,
}

impl EstimatorParams {
    pub fn new(kind: EstimatorKind, eps: f64, u: f64, v: f64, delta: f64) -> Self {
        EstimatorParams { kind, eps, u, v, delta, conf_scale: 1.0, range: 1.0, blocks: None }
    }

    pub fn with_conf_scale(mut self, conf_scale: f64) -> Self {
        self.conf_scale = conf_scale;
        self
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        check_delta(self.delta)?;
        check_eps(self.eps)?;
        if !(self.conf_scale > 0.0 && self.conf_scale <= 1.0) {
            return Err(EstimatorError::InvalidScale(self.conf_scale));
        }
        match self.kind {
            EstimatorKind::Truncated if !(self.u > 0.0 && self.u.is_finite()) => {
                Err(EstimatorError::InvalidMoment(self.u))
            }
            EstimatorKind::MedianOfMeans if !(self.v > 0.0 && self.v.is_finite()) => {
                Err(EstimatorError::InvalidMoment(self.v))
            }
            EstimatorKind::MedianOfMeans if self.blocks == Some(0) => Err(EstimatorError::InvalidBlockCount),
            _ => Ok(()),
        }
    }
}

/// Per-(state, action) streaming statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustAccumulator {
    params: EstimatorParams,
    log_inv_delta: f64,
    n: u64,
    sum: f64,
    samples: Vec<f64>,
}

impl RobustAccumulator {
    pub fn new(params: EstimatorParams) -> Result<Self, EstimatorError> {
        params.validate()?;
        Ok(RobustAccumulator {
            params,
            log_inv_delta: (1.0 / params.delta).ln(),
            n: 0,
            sum: 0.0,
            samples: Vec::new(),
        })
    }

    pub fn params(&self) -> &EstimatorParams {
        &self.params
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Running sum of accepted samples (Empirical and Truncated kinds).
    pub fn running_sum(&self) -> f64 {
        self.sum
    }

    pub fn add_sample(&mut self, x: f64) -> Result<(), EstimatorError> {
        if !x.is_finite() {
            return Err(EstimatorError::NonFiniteSample(x));
        }
        self.n += 1;
        match self.params.kind {
            EstimatorKind::Empirical => self.sum += x,
            EstimatorKind::Truncated => {
                let p = &self.params;
                if x.abs() <= threshold_unchecked(p.u, p.eps, self.n as f64, self.log_inv_delta) {
                    self.sum += x;
                }
            }
            EstimatorKind::MedianOfMeans => self.samples.push(x),
        }
        Ok(())
    }

    /// Block count used by median-of-means for `n` samples:
    /// `min(floor(8 log(e^(1/8) / delta)), floor(n / 2))`, at least 1.
    pub fn block_count(&self, n: u64) -> usize {
        if let Some(k) = self.params.blocks {
            return k.clamp(1, n.max(1) as usize);
        }
        let by_delta = (8.0 * (0.125 + self.log_inv_delta)).floor() as u64;
        by_delta.min(n / 2).max(1) as usize
    }

    pub fn mean(&self) -> Result<f64, EstimatorError> {
        if self.n == 0 {
            return Err(EstimatorError::NoSamples);
        }
        Ok(match self.params.kind {
            EstimatorKind::Empirical | EstimatorKind::Truncated => self.sum / self.n as f64,
            EstimatorKind::MedianOfMeans => median_of_means(&self.samples, self.block_count(self.n)),
        })
    }

    pub fn confidence_radius(&self) -> Result<f64, EstimatorError> {
        if self.n == 0 {
            return Err(EstimatorError::NoSamples);
        }
        let p = &self.params;
        Ok(match p.kind {
            EstimatorKind::Empirical => {
                p.conf_scale * p.range * (self.log_inv_delta / (2.0 * self.n as f64)).sqrt()
            }
            EstimatorKind::Truncated | EstimatorKind::MedianOfMeans => {
                let moment = if p.kind == EstimatorKind::Truncated { p.u } else { p.v };
                let c = p.kind.robust_constant(p.eps).expect("robust kind");
                robust_radius(moment, p.eps, c, p.delta, self.n, p.conf_scale)
            }
        })
    }
}

/// Median of `k` block means over `samples` in arrival order. Block sizes
/// differ by at most one; an even block count averages the middle pair.
pub fn median_of_means(samples: &[f64], k: usize) -> f64 {
    let n = samples.len();
    assert!(n > 0, "median_of_means on empty input");
    let k = k.clamp(1, n);
    let base = n / k;
    let extra = n % k;
    let mut means = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        let block = &samples[start..start + len];
        means.push(block.iter().sum::<f64>() / len as f64);
        start += len;
    }
    median(&mut means)
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}
