//! Extended value iteration over L1 confidence balls.

use super::{argmax, AgentError};
use crate::environments::EnvError;

pub const DEFAULT_EVI_MAX_ITERATIONS: usize = 1_000_000;

/// Self-loop mixing weight, same transform as the gain oracle.
const TAU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EviSolution {
    /// Final iterate, shifted so its minimum is 0.
    pub values: Vec<f64>,
    /// Greedy policy (lowest action index on ties).
    pub policy: Vec<usize>,
    /// Midpoint of the last value increments: the optimistic gain up to the slack.
    pub gain: f64,
    pub iterations: usize,
}

/// Maximises `p . u` over `{p in simplex : |p - p_hat|_1 <= budget}`.
///
/// Returns the value and the maximiser. Mass `budget / 2` (capped so the
/// best state stays at most 1) moves onto the state with the largest `u`
/// and is removed from the states with the smallest `u` first.
pub fn inner_max(p_hat: &[f64], budget: f64, u: &[f64]) -> (f64, Vec<f64>) {
    let order = descending_order(u);
    let mut p = Vec::with_capacity(p_hat.len());
    let value = inner_max_sorted(p_hat, budget, u, &order, &mut p);
    (value, p)
}

pub(crate) fn descending_order(u: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[j].total_cmp(&u[i]).then(i.cmp(&j)));
    order
}

/// [`inner_max`] with the states already sorted by decreasing `u`.
pub(crate) fn inner_max_sorted(p_hat: &[f64], budget: f64, u: &[f64], order: &[usize], p: &mut Vec<f64>) -> f64 {
    p.clear();
    p.extend_from_slice(p_hat);
    let best = order[0];
    let added = (budget / 2.0).min(1.0 - p[best]).max(0.0);
    p[best] += added;
    let mut excess = added;
    for &j in order.iter().rev() {
        if excess <= 0.0 {
            break;
        }
        if j == best {
            continue;
        }
        let take = p[j].min(excess);
        p[j] -= take;
        excess -= take;
    }
    p.iter().zip(u).map(|(pi, ui)| pi * ui).sum()
}

/// Value iteration on the optimistic MDP whose reward is `r_tilde[s][a]`
/// and whose transition row for `(s, a)` ranges over the L1 ball of radius
/// `p_radius[s][a]` around `p_hat[s][a]`.
///
/// Stops once `max(u_{i+1} - u_i) - min(u_{i+1} - u_i) < stop_slack`, at which
/// point the greedy policy is `stop_slack`-optimal for the optimistic model.
pub fn extended_value_iteration(
    n_states: usize,
    n_actions: usize,
    r_tilde: &[f64],
    p_hat: &[f64],
    p_radius: &[f64],
    stop_slack: f64,
    max_iterations: usize,
) -> Result<EviSolution, AgentError> {
    let pairs = n_states * n_actions;
    if r_tilde.len() != pairs || p_radius.len() != pairs || p_hat.len() != pairs * n_states {
        return Err(AgentError::InvalidParameter("EVI input shapes disagree with S and A".into()));
    }
    let mut u = vec![0.0; n_states];
    let mut next = vec![0.0; n_states];
    let mut policy = vec![0; n_states];
    let mut q = vec![0.0; n_actions];
    let mut p = Vec::with_capacity(n_states);
    let mut span = f64::INFINITY;
    for iteration in 1..=max_iterations {
        let order = descending_order(&u);
        for s in 0..n_states {
            for (a, qa) in q.iter_mut().enumerate() {
                let i = s * n_actions + a;
                let row = &p_hat[i * n_states..(i + 1) * n_states];
                let best = inner_max_sorted(row, p_radius[i], &u, &order, &mut p);
                *qa = r_tilde[i] + TAU * best + (1.0 - TAU) * u[s];
            }
            policy[s] = argmax(&q);
            next[s] = q[policy[s]];
        }
        let (lo, hi) = next
            .iter()
            .zip(&u)
            .map(|(n, o)| n - o)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = hi - lo;
        let floor = next.iter().copied().fold(f64::INFINITY, f64::min);
        for (o, n) in u.iter_mut().zip(&next) {
            *o = n - floor;
        }
        if span < stop_slack {
            return Ok(EviSolution { values: u, policy, gain: 0.5 * (lo + hi), iterations: iteration });
        }
    }
    Err(EnvError::NoConvergence { iterations: max_iterations, span }.into())
}
