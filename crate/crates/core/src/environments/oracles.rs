//! Exact planners on known models: optimal gain for the average-reward
//! criterion and backward induction for the finite-horizon one.

use super::{EnvError, EpisodicMDP, InitialState, TabularMDP};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// Self-loop weight mixed into every transition row before iterating. The
/// mixed chain is aperiodic and has the same stationary distributions, so
/// every policy keeps its gain; biases scale by `1 / APERIODICITY`.
pub(crate) const APERIODICITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GainSolution {
    pub gain: f64,
    /// Bias vector, shifted so that its minimum is 0.
    pub bias: Vec<f64>,
    /// Greedy policy with respect to the final iterate (lowest index on ties).
    pub policy: Vec<usize>,
    pub iterations: usize,
}

/// Optimal average reward `rho*` and bias of a communicating MDP by relative
/// value iteration on the true mean rewards.
pub fn optimal_gain(mdp: &TabularMDP, tol: f64) -> Result<GainSolution, EnvError> {
    optimal_gain_with(mdp.n_states(), mdp.n_actions(), mdp.mean_rewards(), mdp.transitions(), tol, DEFAULT_MAX_ITERATIONS)
}

/// Relative value iteration on raw arrays (`rewards` is `[s][a]`,
/// `transitions` is `[s][a][s']`). Stops once the span of the value
/// increments drops below `tol`.
pub fn optimal_gain_with(
    n_states: usize,
    n_actions: usize,
    rewards: &[f64],
    transitions: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<GainSolution, EnvError> {
    let tau = APERIODICITY;
    let mut values = vec![0.0; n_states];
    let mut next = vec![0.0; n_states];
    let mut policy = vec![0; n_states];
    let mut span = f64::INFINITY;
    for iteration in 1..=max_iterations {
        for s in 0..n_states {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..n_actions {
                let row = &transitions[(s * n_actions + a) * n_states..(s * n_actions + a + 1) * n_states];
                let expected: f64 = row.iter().zip(&values).map(|(p, v)| p * v).sum();
                let q = rewards[s * n_actions + a] + tau * expected + (1.0 - tau) * values[s];
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            next[s] = best;
            policy[s] = best_a;
        }
        let (lo, hi) = min_max(next.iter().zip(&values).map(|(n, v)| n - v));
        span = hi - lo;
        if span < tol {
            let base = next.iter().copied().fold(f64::INFINITY, f64::min);
            let bias = next.iter().map(|v| tau * (v - base)).collect();
            return Ok(GainSolution { gain: 0.5 * (hi + lo), bias, policy, iterations: iteration });
        }
        let anchor = next[0];
        for (v, n) in values.iter_mut().zip(&next) {
            *v = n - anchor;
        }
    }
    Err(EnvError::NoConvergence { iterations: max_iterations, span })
}

pub(crate) fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Optimal finite-horizon values: `values[h][s]` for `h` in `0..=H` (with
/// `values[H] = 0`), `q[h][s * A + a]` and a greedy `policy[h][s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHorizonValues {
    pub values: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub policy: Vec<Vec<usize>>,
}

pub fn finite_horizon_values(mdp: &EpisodicMDP) -> FiniteHorizonValues {
    let (n_states, n_actions, horizon) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    let mut values = vec![vec![0.0; n_states]; horizon + 1];
    let mut q = vec![vec![0.0; n_states * n_actions]; horizon];
    let mut policy = vec![vec![0; n_states]; horizon];
    for h in (0..horizon).rev() {
        let kernel = mdp.kernel(h);
        for s in 0..n_states {
            let mut best = f64::NEG_INFINITY;
            for a in 0..n_actions {
                let cont: f64 = kernel.row(s, a).iter().zip(&values[h + 1]).map(|(p, v)| p * v).sum();
                let value = kernel.mean_reward(s, a) + cont;
                q[h][s * n_actions + a] = value;
                if value > best {
                    best = value;
                    policy[h][s] = a;
                }
            }
            values[h][s] = best;
        }
    }
    FiniteHorizonValues { values, q, policy }
}

/// `V*_1(s0)` (expected over the initial distribution when one is given).
pub fn episodic_optimal_value(mdp: &EpisodicMDP) -> f64 {
    let fh = finite_horizon_values(mdp);
    match mdp.kernel(0).initial() {
        InitialState::Fixed(s) => fh.values[0][*s],
        InitialState::Distribution(d) => d.iter().zip(&fh.values[0]).map(|(p, v)| p * v).sum(),
    }
}
