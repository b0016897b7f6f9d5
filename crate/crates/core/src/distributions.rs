//! Reward distributions with exact means and (1+eps)-th moment bounds.
//!
//! Symmetric stable laws are sampled with the Chambers-Mallows-Stuck
//! transform. With skewness fixed to zero the S0 and S1 parameterizations
//! coincide, so the location parameter is the mean whenever `alpha > 1`.
//! The scale follows the usual convention where the characteristic function
//! is `exp(i*mean*t - |scale*t|^alpha)`; at `alpha = 2` this is a Gaussian
//! with variance `2 * scale^2`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("mean is undefined for a stable law with alpha = {0} (requires alpha > 1)")]
    UndefinedMean(f64),
    #[error("moment does not exist: order {order} >= alpha = {alpha}")]
    MomentDoesNotExist { order: f64, alpha: f64 },
    #[error("eps must lie in (0, 1], got {0}")]
    InvalidEps(f64),
}

/// A reward distribution attached to a state-action pair.
///
/// Values built through the constructors or deserialized from a config are
/// validated; building a variant by hand skips that check, so call
/// [`RewardDist::validate`] on such values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistSpec", into = "DistSpec")]
pub enum RewardDist {
    Gaussian { mean: f64, stddev: f64 },
    SymmetricStable { mean: f64, alpha: f64, scale: f64 },
    /// `offset + scale * Bernoulli(p)`.
    ScaledBernoulli { scale: f64, p: f64, offset: f64 },
    Constant { value: f64 },
}

/// Config-file form of [`RewardDist`]: `{ kind = "stable", mean = 1.0, alpha = 1.1, scale = 1.0 }`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DistSpec {
    Gaussian {
        mean: f64,
        stddev: f64,
    },
    Stable {
        mean: f64,
        alpha: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Bernoulli {
        scale: f64,
        p: f64,
        #[serde(default)]
        offset: f64,
    },
    Constant {
        value: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl TryFrom<DistSpec> for RewardDist {
    type Error = DistError;

    fn try_from(spec: DistSpec) -> Result<Self, Self::Error> {
        let dist = match spec {
            DistSpec::Gaussian { mean, stddev } => RewardDist::Gaussian { mean, stddev },
            DistSpec::Stable { mean, alpha, scale } => RewardDist::SymmetricStable { mean, alpha, scale },
            DistSpec::Bernoulli { scale, p, offset } => RewardDist::ScaledBernoulli { scale, p, offset },
            DistSpec::Constant { value } => RewardDist::Constant { value },
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl From<RewardDist> for DistSpec {
    fn from(dist: RewardDist) -> Self {
        match dist {
            RewardDist::Gaussian { mean, stddev } => DistSpec::Gaussian { mean, stddev },
            RewardDist::SymmetricStable { mean, alpha, scale } => DistSpec::Stable { mean, alpha, scale },
            RewardDist::ScaledBernoulli { scale, p, offset } => DistSpec::Bernoulli { scale, p, offset },
            RewardDist::Constant { value } => DistSpec::Constant { value },
        }
    }
}

fn check(name: &'static str, value: f64, ok: bool) -> Result<(), DistError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(DistError::InvalidParameter { name, value })
    }
}

fn check_eps(eps: f64) -> Result<(), DistError> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(DistError::InvalidEps(eps))
    }
}

impl RewardDist {
    pub fn gaussian(mean: f64, stddev: f64) -> Result<Self, DistError> {
        let d = RewardDist::Gaussian { mean, stddev };
        d.validate().map(|_| d)
    }

    pub fn stable(mean: f64, alpha: f64, scale: f64) -> Result<Self, DistError> {
        let d = RewardDist::SymmetricStable { mean, alpha, scale };
        d.validate().map(|_| d)
    }

    pub fn bernoulli(scale: f64, p: f64, offset: f64) -> Result<Self, DistError> {
        let d = RewardDist::ScaledBernoulli { scale, p, offset };
        d.validate().map(|_| d)
    }

    pub fn constant(value: f64) -> Result<Self, DistError> {
        let d = RewardDist::Constant { value };
        d.validate().map(|_| d)
    }

    pub fn validate(&self) -> Result<(), DistError> {
        match *self {
            RewardDist::Gaussian { mean, stddev } => {
                check("mean", mean, true)?;
                check("stddev", stddev, stddev >= 0.0)
            }
            RewardDist::SymmetricStable { mean, alpha, scale } => {
                check("mean", mean, true)?;
                check("alpha", alpha, alpha > 0.0 && alpha <= 2.0)?;
                check("scale", scale, scale > 0.0)?;
                if alpha <= 1.0 {
                    return Err(DistError::UndefinedMean(alpha));
                }
                Ok(())
            }
            RewardDist::ScaledBernoulli { scale, p, offset } => {
                check("scale", scale, scale > 0.0)?;
                check("p", p, (0.0..=1.0).contains(&p))?;
                check("offset", offset, true)
            }
            RewardDist::Constant { value } => check("value", value, true),
        }
    }

    /// One i.i.d. draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RewardDist::Gaussian { mean, stddev } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + stddev * z
            }
            RewardDist::SymmetricStable { mean, alpha, scale } => {
                mean + scale * standard_symmetric_stable(alpha, rng)
            }
            RewardDist::ScaledBernoulli { scale, p, offset } => {
                if rng.random::<f64>() < p {
                    offset + scale
                } else {
                    offset
                }
            }
            RewardDist::Constant { value } => value,
        }
    }

    /// Exact mean.
    pub fn mean(&self) -> f64 {
        match *self {
            RewardDist::Gaussian { mean, .. } | RewardDist::SymmetricStable { mean, .. } => mean,
            RewardDist::ScaledBernoulli { scale, p, offset } => scale * p + offset,
            RewardDist::Constant { value } => value,
        }
    }

    /// Upper bound `u >= E|X|^(1+eps)`.
    ///
    /// Exact for Bernoulli and constant laws, and for Gaussians at `eps = 1`.
    /// Gaussians with `eps < 1` use Lyapunov's inequality
    /// `E|X|^p <= (E X^2)^(p/2)`. Stable laws centred at zero are exact; a
    /// non-zero location uses the convexity bound
    /// `|m + Y|^p <= 2^(p-1) (|m|^p + |Y|^p)` on top of the exact centred
    /// moment.
    pub fn raw_moment_bound(&self, eps: f64) -> Result<f64, DistError> {
        check_eps(eps)?;
        let p = 1.0 + eps;
        Ok(match *self {
            RewardDist::Gaussian { mean, stddev } => {
                let second = mean * mean + stddev * stddev;
                if eps == 1.0 {
                    second
                } else {
                    second.powf(p / 2.0)
                }
            }
            RewardDist::SymmetricStable { mean, alpha, scale } => {
                let centred = stable_abs_moment(p, alpha, scale)?;
                if mean == 0.0 {
                    centred
                } else {
                    2f64.powf(eps) * (mean.abs().powf(p) + centred)
                }
            }
            RewardDist::ScaledBernoulli { scale, p: q, offset } => {
                q * (offset + scale).abs().powf(p) + (1.0 - q) * offset.abs().powf(p)
            }
            RewardDist::Constant { value } => value.abs().powf(p),
        })
    }

    /// Upper bound `v >= E|X - mean|^(1+eps)`; exact for every variant.
    pub fn centered_moment_bound(&self, eps: f64) -> Result<f64, DistError> {
        check_eps(eps)?;
        let p = 1.0 + eps;
        Ok(match *self {
            RewardDist::Gaussian { stddev, .. } => {
                if stddev == 0.0 {
                    0.0
                } else if eps == 1.0 {
                    stddev * stddev
                } else {
                    // E|Z|^p for a standard normal Z.
                    stddev.powf(p) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt()
                }
            }
            RewardDist::SymmetricStable { alpha, scale, .. } => stable_abs_moment(p, alpha, scale)?,
            RewardDist::ScaledBernoulli { scale, p: q, offset } => {
                let mu = self.mean();
                q * (offset + scale - mu).abs().powf(p) + (1.0 - q) * (offset - mu).abs().powf(p)
            }
            RewardDist::Constant { .. } => 0.0,
        })
    }
}

/// `E|Y|^p` for a centred symmetric stable `Y` with the given scale, `0 < p < alpha`.
fn stable_abs_moment(p: f64, alpha: f64, scale: f64) -> Result<f64, DistError> {
    if p >= alpha {
        return Err(DistError::MomentDoesNotExist { order: p, alpha });
    }
    let unit = 2f64.powf(p) * gamma((1.0 + p) / 2.0) * gamma(1.0 - p / alpha)
        / (PI.sqrt() * gamma(1.0 - p / 2.0));
    Ok(scale.powf(p) * unit)
}

/// Chambers-Mallows-Stuck draw of a standard symmetric stable variable.
fn standard_symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let angle = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = rng.sample(Exp1);
    if alpha == 1.0 {
        return angle.tan();
    }
    let head = (alpha * angle).sin() / angle.cos().powf(1.0 / alpha);
    head * (((1.0 - alpha) * angle).cos() / w).powf((1.0 - alpha) / alpha)
}
