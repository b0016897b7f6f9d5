use rand::SeedableRng;

use super::Result;
use crate::distributions::RewardDist;
use crate::estimators::{EstimatorKind, EstimatorParams, RobustAccumulator};
use crate::SimRng;

/// Deviation statistics of one estimator at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub estimator: EstimatorKind,
    pub n: u64,
    pub trials: u64,
    pub radius: f64,
    pub mean_abs_error: f64,
    /// Fraction of trials with `|estimate - mean| > radius`.
    pub violation_rate: f64,
}

/// Draws `trials` samples of size `n` for each `n` and scores every
/// estimator on the same samples. `u` and `v` come from the distribution's
/// moment bounds; the empirical radius uses range 1.
pub fn estimator_bench(
    dist: &RewardDist,
    kinds: &[EstimatorKind],
    eps: f64,
    delta: f64,
    ns: &[u64],
    trials: u64,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let (u, v, mu) = (dist.raw_moment_bound(eps)?, dist.centered_moment_bound(eps)?, dist.mean());
    let mut rows = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut errors = vec![0.0; kinds.len()];
        let mut violations = vec![0u64; kinds.len()];
        let mut radii = vec![0.0; kinds.len()];
        for _ in 0..trials {
            let mut accs = kinds
                .iter()
                .map(|&kind| RobustAccumulator::new(EstimatorParams::new(kind, eps, u, v, delta)))
                .collect::<Result<Vec<_>, _>>()?;
            for _ in 0..n {
                let x = dist.sample(&mut rng);
                for acc in &mut accs {
                    acc.add_sample(x)?;
                }
            }
            for (j, acc) in accs.iter().enumerate() {
                let err = (acc.mean()? - mu).abs();
                radii[j] = acc.confidence_radius()?;
                errors[j] += err;
                if err > radii[j] {
                    violations[j] += 1;
                }
            }
        }
        for (j, &estimator) in kinds.iter().enumerate() {
            rows.push(BenchRow {
                estimator,
                n,
                trials,
                radius: radii[j],
                mean_abs_error: errors[j] / trials.max(1) as f64,
                violation_rate: violations[j] as f64 / trials.max(1) as f64,
            });
        }
    }
    Ok(rows)
}
