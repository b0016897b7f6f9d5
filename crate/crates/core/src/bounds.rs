//! Closed-form regret and sample-complexity bounds, and numerical checks of
//! the two standalone inequalities the analysis relies on.
//!
//! Bounds given only up to order are evaluated with leading constant 1 and
//! flagged as such in [`BoundReport`]. A bound is flagged vacuous when it
//! exceeds `T * R_delta`, the regret of any policy.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environments::TabularMDP;
use crate::estimators::EstimatorKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("missing parameter `{0}`")]
    MissingField(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sequence precondition violated at index {index}: z = {value} not in [0, {limit}]")]
    PreconditionViolated { index: usize, value: f64, limit: f64 },
}

/// Inputs to the bound formulas. Every field is optional; each formula
/// reports the first missing field it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryParams {
    pub diameter: Option<f64>,
    pub states: Option<f64>,
    pub actions: Option<f64>,
    /// Total steps T.
    pub steps: Option<f64>,
    pub horizon: Option<f64>,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    /// Centred moment bound.
    pub v: Option<f64>,
    /// Raw moment bound.
    pub u: Option<f64>,
    pub r_max: Option<f64>,
    pub r_min: Option<f64>,
    /// Number of MDPs in a changing environment.
    pub change_budget: Option<f64>,
    /// Target accuracy (average per-step regret).
    pub lambda: Option<f64>,
    /// Gap between the best and second-best policy gains.
    pub gap: Option<f64>,
    /// Largest expected return time of a policy through a pair, `max T_pi`.
    pub policy_return_time: Option<f64>,
    /// Estimator whose constant `c` enters the bounds (truncated mean by default).
    pub estimator: Option<EstimatorKind>,
}

macro_rules! getter {
    ($name:ident) => {
        fn $name(&self) -> Result<f64, BoundError> {
            self.$name.ok_or(BoundError::MissingField(stringify!($name)))
        }
    };
}

impl TheoryParams {
    getter!(diameter);
    getter!(states);
    getter!(actions);
    getter!(steps);
    getter!(horizon);
    getter!(delta);
    getter!(v);
    getter!(u);
    getter!(r_max);
    getter!(change_budget);
    getter!(lambda);
    getter!(gap);
    getter!(policy_return_time);

    fn eps(&self) -> Result<f64, BoundError> {
        let eps = self.eps.ok_or(BoundError::MissingField("eps"))?;
        if eps > 0.0 && eps <= 1.0 {
            Ok(eps)
        } else {
            Err(BoundError::InvalidParameter(format!("eps = {eps} must lie in (0, 1]")))
        }
    }

    fn r_range(&self) -> Result<f64, BoundError> {
        let r_min = self.r_min.ok_or(BoundError::MissingField("r_min"))?;
        Ok(self.r_max()? - r_min)
    }

    /// Estimator constant `c`.
    pub fn estimator_constant(&self) -> Result<f64, BoundError> {
        let kind = self.estimator.unwrap_or(EstimatorKind::Truncated);
        kind.robust_constant(self.eps()?)
            .ok_or_else(|| BoundError::InvalidParameter("the empirical mean has no robust constant".into()))
    }

    /// `iota = log(2SAT / delta)`.
    pub fn iota(&self) -> Result<f64, BoundError> {
        Ok((2.0 * self.states()? * self.actions()? * self.steps()? / self.delta()?).ln())
    }
}

/// `C_eps = 2 / (2^(1/(1+eps)) - 1)`, the constant of the sequence inequality.
pub fn c_epsilon(eps: f64) -> f64 {
    2.0 / (2f64.powf(1.0 / (1.0 + eps)) - 1.0)
}

/// Transition part `20 R D S sqrt(A T log(T/delta))` of the minimax bound.
pub fn minimax_transition_term(p: &TheoryParams) -> Result<f64, BoundError> {
    let t = p.steps()?;
    Ok(20.0 * p.r_range()? * p.diameter()? * p.states()? * (p.actions()? * t * (t / p.delta()?).ln()).sqrt())
}

/// Heavy-tail part `(2C_eps + 1) v^(1/(1+eps)) (7 c iota)^(eps/(1+eps)) (SAT)^(1/(1+eps))`.
pub fn minimax_reward_term(p: &TheoryParams) -> Result<f64, BoundError> {
    let eps = p.eps()?;
    let sat = p.states()? * p.actions()? * p.steps()?;
    Ok((2.0 * c_epsilon(eps) + 1.0)
        * p.v()?.powf(1.0 / (1.0 + eps))
        * (7.0 * p.estimator_constant()? * p.iota()?).powf(eps / (1.0 + eps))
        * sat.powf(1.0 / (1.0 + eps)))
}

/// High-probability minimax regret bound of Heavy-UCRL2.
pub fn minimax_regret_bound(p: &TheoryParams) -> Result<f64, BoundError> {
    Ok(minimax_transition_term(p)? + minimax_reward_term(p)?)
}

fn gap_constant(p: &TheoryParams, iota: f64) -> Result<f64, BoundError> {
    let eps = p.eps()?;
    Ok(7.0 * p.estimator_constant()? * iota * (4.0 * c_epsilon(eps) + 2.0).powf((1.0 + eps) / eps))
}

/// Regret bound for accuracy `lambda`:
/// `7 c iota (4C_eps + 2)^((1+eps)/eps) (SA/lambda)^(1/eps) + lambda T`.
pub fn gap_regret_bound(p: &TheoryParams) -> Result<f64, BoundError> {
    let (eps, lambda) = (p.eps()?, p.lambda()?);
    let sa = p.states()? * p.actions()?;
    Ok(gap_constant(p, p.iota()?)? * (sa / lambda).powf(1.0 / eps) + lambda * p.steps()?)
}

/// Expected regret bound in terms of the policy gap `g`, with `delta = 1/(3T)`
/// and every pair charged `ceil(1 + log2 T_pi) T_pi`.
pub fn expected_gap_regret_bound(p: &TheoryParams) -> Result<f64, BoundError> {
    let (eps, gap, t) = (p.eps()?, p.gap()?, p.steps()?);
    let sa = p.states()? * p.actions()?;
    let iota = (2.0 * sa * t * 3.0 * t).ln();
    let t_pi = p.policy_return_time()?;
    Ok(gap_constant(p, iota)? * (2.0 * sa / gap).powf(1.0 / eps) + sa * (1.0 + t_pi.log2()).ceil() * t_pi)
}

/// Steps after which the average per-step regret is at most `lambda`.
pub fn pac_threshold(p: &TheoryParams) -> Result<f64, BoundError> {
    let (eps, lambda, delta) = (p.eps()?, p.lambda()?, p.delta()?);
    let (s, a, d, r) = (p.states()?, p.actions()?, p.diameter()?, p.r_range()?);
    let first = 16.0 * 400.0 * r * r * d * d * s * s * a / (lambda * lambda)
        * (40.0 * r * d * s * a / (delta * lambda)).ln();
    let alpha = 7.0
        * p.estimator_constant()?
        * (4.0 * c_epsilon(eps) + 2.0).powf((1.0 + eps) / eps)
        * p.v()?.powf(1.0 / eps)
        * (s * a).powf(1.0 / eps)
        / lambda.powf((1.0 + eps) / eps);
    let second = alpha * (2.0 * s * a / delta).ln() + 2.0 * alpha * (alpha / delta).ln();
    Ok(first.max(second))
}

/// Regret bound of restarted Heavy-UCRL2 when the MDP changes up to `l - 1`
/// times: `R l^(eps/(1+2eps)) T^((1+eps)/(1+2eps)) (SA)^(1/(1+eps))`. Requires `eps < 1`.
pub fn changing_mdp_regret_bound(p: &TheoryParams) -> Result<f64, BoundError> {
    let eps = p.eps()?;
    if eps >= 1.0 {
        return Err(BoundError::InvalidParameter("the changing-MDP bound requires eps < 1".into()));
    }
    Ok(p.r_range()?
        * p.change_budget()?.powf(eps / (1.0 + 2.0 * eps))
        * p.steps()?.powf((1.0 + eps) / (1.0 + 2.0 * eps))
        * (p.states()? * p.actions()?).powf(1.0 / (1.0 + eps)))
}

/// Order of the Heavy-Q-Learning (Hoeffding) regret:
/// `r_max H^2 sqrt(SAT) + H^2 (SA iota)^(eps/(1+eps)) T^(1/(1+eps))`.
pub fn heavy_q_hoeffding_regret_order(p: &TheoryParams) -> Result<f64, BoundError> {
    let (eps, h, t) = (p.eps()?, p.horizon()?, p.steps()?);
    let sa = p.states()? * p.actions()?;
    Ok(p.r_max()? * h * h * (sa * t).sqrt()
        + h * h * (sa * p.iota()?).powf(eps / (1.0 + eps)) * t.powf(1.0 / (1.0 + eps)))
}

/// Order of the Heavy-Q-Learning (Bernstein) regret, five terms.
pub fn heavy_q_bernstein_regret_order(p: &TheoryParams) -> Result<f64, BoundError> {
    let (eps, h, t, iota, r_max, u) = (p.eps()?, p.horizon()?, p.steps()?, p.iota()?, p.r_max()?, p.u()?);
    let sa = p.states()? * p.actions()?;
    let r = r_max.max(0.0);
    Ok((h.powi(3) * r.powi(3) * sa * t * iota).sqrt()
        + h * h * (sa * iota).powf(eps / (1.0 + eps)) * t.powf(1.0 / (1.0 + eps))
        + (h.powi(9) * r * r * u.powf(1.0 / (1.0 + eps)) * sa.powi(3) * iota.powi(3)).sqrt()
        + (h.powf((1.0 + 4.0 * eps) / eps) * r * sa * sa * iota * iota).sqrt()
        + h.powf((1.0 + 3.0 * eps) / eps) * (sa.powi(3) * iota.powi(4) * eps).sqrt())
}

/// Order of the regret lower bound, `(SA)^(eps/(1+eps)) T^(1/(1+eps))`,
/// times `H` when a horizon is given.
pub fn regret_lower_bound_order(p: &TheoryParams) -> Result<f64, BoundError> {
    let eps = p.eps()?;
    let base = (p.states()? * p.actions()?).powf(eps / (1.0 + eps)) * p.steps()?.powf(1.0 / (1.0 + eps));
    Ok(base * p.horizon.unwrap_or(1.0))
}

/// Smallest `T` (searched over `[1, 1e300]`) from which the heavy-tail term
/// of the minimax bound is at least the transition term. Returns 1 when it
/// dominates from the start and `None` when it never catches up.
pub fn minimax_crossover(p: &TheoryParams) -> Result<Option<f64>, BoundError> {
    let diff = |log_t: f64| -> Result<f64, BoundError> {
        let q = TheoryParams { steps: Some(log_t.exp()), ..p.clone() };
        Ok(minimax_reward_term(&q)?.ln() - minimax_transition_term(&q)?.ln())
    };
    // The transition term vanishes at T = 1 (log(T/delta) > 0 needs T > delta).
    let lo_end = 0.0;
    let hi_end = 300.0 * std::f64::consts::LN_10;
    if diff(lo_end)? >= 0.0 {
        return Ok(Some(1.0));
    }
    let grid = 2048;
    let mut prev = (lo_end, diff(lo_end)?);
    for k in 1..=grid {
        let x = lo_end + (hi_end - lo_end) * k as f64 / grid as f64;
        let fx = diff(x)?;
        if fx >= 0.0 {
            return Ok(Some(refine_root(&diff, prev, (x, fx))?.exp()));
        }
        prev = (x, fx);
    }
    Ok(None)
}

/// Safeguarded secant (Illinois) refinement of a bracketed sign change.
fn refine_root(
    f: &impl Fn(f64) -> Result<f64, BoundError>,
    (mut a, mut fa): (f64, f64),
    (mut b, mut fb): (f64, f64),
) -> Result<f64, BoundError> {
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc.abs() < 1e-14 || (b - a).abs() < 1e-14 * b.abs().max(1.0) {
            return Ok(c);
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb /= 2.0;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa /= 2.0;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// One evaluated bound for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: &'static str,
    pub value: Result<f64, String>,
    pub order_only: bool,
    pub vacuous: bool,
}

/// Evaluates every regret bound the parameters allow, plus the PAC threshold.
pub fn evaluate_all(p: &TheoryParams) -> Vec<BoundReport> {
    type Eval = fn(&TheoryParams) -> Result<f64, BoundError>;
    let entries: [(&'static str, Eval, bool, bool); 8] = [
        ("minimax_regret", minimax_regret_bound, false, true),
        ("gap_regret", gap_regret_bound, false, true),
        ("expected_gap_regret", expected_gap_regret_bound, false, true),
        ("pac_threshold_steps", pac_threshold, false, false),
        ("changing_mdp_regret", changing_mdp_regret_bound, false, true),
        ("heavy_q_hoeffding_regret", heavy_q_hoeffding_regret_order, true, true),
        ("heavy_q_bernstein_regret", heavy_q_bernstein_regret_order, true, true),
        ("regret_lower_bound", regret_lower_bound_order, true, false),
    ];
    let trivial = p.steps().and_then(|t| Ok(t * p.r_range()?)).ok();
    entries
        .iter()
        .map(|&(name, eval, order_only, is_regret)| {
            let value = eval(p).map_err(|e| e.to_string());
            let vacuous = match (&value, trivial) {
                (Ok(v), Some(limit)) if is_regret => *v > limit,
                _ => false,
            };
            BoundReport { name, value, order_only, vacuous }
        })
        .collect()
}

/// Diameter: the largest, over ordered state pairs, of the smallest expected
/// time to travel between them. Infinite when some state is unreachable.
pub fn diameter(mdp: &TabularMDP, tol: f64, max_iterations: usize) -> f64 {
    let (n_states, n_actions) = (mdp.n_states(), mdp.n_actions());
    let mut worst: f64 = 0.0;
    for target in 0..n_states {
        let mut h = vec![0.0; n_states];
        let mut converged = false;
        for _ in 0..max_iterations {
            let mut change: f64 = 0.0;
            for s in 0..n_states {
                if s == target {
                    continue;
                }
                let best = (0..n_actions)
                    .map(|a| 1.0 + mdp.row(s, a).iter().zip(&h).map(|(p, x)| p * x).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                change = change.max((best - h[s]).abs());
                h[s] = best;
            }
            if change < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return f64::INFINITY;
        }
        worst = worst.max(h.iter().copied().fold(0.0, f64::max));
    }
    worst
}

/// Both sides of the sequence inequality
/// `sum_k z_k / Z_{k-1}^(eps/(1+eps)) <= C_eps Z_n^(1/(1+eps))`,
/// with `Z_k = max(1, z_1 + ... + z_k)`.
pub fn sequence_lemma_sides(z: &[f64], eps: f64) -> Result<(f64, f64), BoundError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(BoundError::InvalidParameter(format!("eps = {eps} must lie in (0, 1]")));
    }
    let power = eps / (1.0 + eps);
    let mut total = 0.0;
    let mut lhs = 0.0;
    for (index, &value) in z.iter().enumerate() {
        let limit = f64::max(1.0, total);
        if !(value >= 0.0 && value <= limit) {
            return Err(BoundError::PreconditionViolated { index, value, limit });
        }
        lhs += value / limit.powf(power);
        total += value;
    }
    let rhs = c_epsilon(eps) * f64::max(1.0, total).powf(1.0 / (1.0 + eps));
    Ok((lhs, rhs))
}

/// Whether `z` satisfies the sequence inequality. Inputs violating
/// `0 <= z_k <= Z_{k-1}` are an error rather than `false`.
pub fn check_sequence_lemma(z: &[f64], eps: f64) -> Result<bool, BoundError> {
    let (lhs, rhs) = sequence_lemma_sides(z, eps)?;
    Ok(lhs <= rhs)
}

/// Weights `alpha^i_t` for `i = 0..=t` with `alpha_j = (H + 1) / (H + j)`:
/// `alpha^0_t = prod_{j<=t} (1 - alpha_j)` and
/// `alpha^i_t = alpha_i prod_{j=i+1..t} (1 - alpha_j)`.
pub fn learning_rate_weights(t: u64, horizon: f64) -> Vec<f64> {
    let rate = |j: u64| (horizon + 1.0) / (horizon + j as f64);
    let mut weights = vec![0.0; t as usize + 1];
    let mut tail = 1.0;
    for i in (1..=t).rev() {
        weights[i as usize] = rate(i) * tail;
        tail *= 1.0 - rate(i);
    }
    weights[0] = tail;
    weights
}

/// `sum_i alpha^i_t i^(-eps/(1+eps))` next to the two bounds `t^(-eps/(1+eps))`
/// and `2 t^(-eps/(1+eps))`.
pub fn learning_rate_lemma_sides(t: u64, eps: f64, horizon: f64) -> (f64, f64, f64) {
    let power = eps / (1.0 + eps);
    let weights = learning_rate_weights(t, horizon);
    let sum: f64 = weights.iter().enumerate().skip(1).map(|(i, w)| w * (i as f64).powf(-power)).sum();
    let base = (t as f64).powf(-power);
    (base, sum, 2.0 * base)
}

/// Relative tolerance used by [`check_alpha_lemma`].
pub const LEMMA_REL_TOL: f64 = 1e-9;

/// Whether `t^(-p) <= sum_i alpha^i_t i^(-p) <= 2 t^(-p)` with `p = eps/(1+eps)`,
/// up to [`LEMMA_REL_TOL`] relative slack.
pub fn check_alpha_lemma(t: u64, eps: f64, horizon: f64) -> bool {
    if t == 0 {
        return false;
    }
    let (lower, sum, upper) = learning_rate_lemma_sides(t, eps, horizon);
    lower <= sum * (1.0 + LEMMA_REL_TOL) && sum <= upper * (1.0 + LEMMA_REL_TOL)
}

/// Sums `S_t = sum_i alpha^i_t i^(-p)` for `t = 1..=t_max` through the
/// recursion `S_t = (1 - alpha_t) S_(t-1) + alpha_t t^(-p)` and returns the
/// first `t` violating the learning-rate inequality, with its three sides.
pub fn alpha_lemma_sweep(t_max: u64, eps: f64, horizon: f64) -> Option<(u64, f64, f64, f64)> {
    let power = eps / (1.0 + eps);
    let mut sum = 0.0;
    for t in 1..=t_max {
        let rate = (horizon + 1.0) / (horizon + t as f64);
        let base = (t as f64).powf(-power);
        sum = (1.0 - rate) * sum + rate * base;
        if !(base <= sum * (1.0 + LEMMA_REL_TOL) && sum <= 2.0 * base * (1.0 + LEMMA_REL_TOL)) {
            return Some((t, base, sum, 2.0 * base));
        }
    }
    None
}

/// Random sequence satisfying `0 <= z_k <= Z_(k-1)`. Each term is a random
/// fraction of its limit, with extra mass on the endpoints 0 and 1.
pub fn random_valid_sequence<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(len);
    let mut total = 0.0f64;
    for _ in 0..len {
        let limit = total.max(1.0);
        let fraction = match rng.random_range(0..10) {
            0 => 0.0,
            1..=3 => 1.0,
            4 => rng.random::<f64>().powi(8),
            _ => rng.random::<f64>(),
        };
        let x = (fraction * limit).min(limit);
        z.push(x);
        total += x;
    }
    z
}

/// Greedy extremal sequence `z_1 = 1`, `z_k = Z_(k-1)`.
pub fn greedy_sequence(len: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(len);
    let mut total = 0.0f64;
    for _ in 0..len {
        let x = total.max(1.0);
        z.push(x);
        total += x;
    }
    z
}

/// Outcome of one family of numerical lemma checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub name: String,
    pub cases: u64,
    pub failures: u64,
}

/// Runs both lemma checks: `sequences` random sequences of length up to
/// `max_len` plus the greedy one for each `eps` in `{0.05, 0.25, 0.5, 1}`, and
/// the learning-rate inequality for `H` in `{1, 2, 5, 10}`, `eps` in
/// `{0.05, 0.5, 1}` and every `t <= t_max`.
pub fn verify_lemmas(sequences: u64, max_len: usize, t_max: u64, seed: u64) -> Result<Vec<LemmaCheck>, BoundError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for eps in [0.05, 0.25, 0.5, 1.0] {
        let mut check = LemmaCheck { name: format!("sequence eps={eps}"), cases: 0, failures: 0 };
        let mut run = |z: &[f64]| -> Result<(), BoundError> {
            check.cases += 1;
            if !check_sequence_lemma(z, eps)? {
                check.failures += 1;
            }
            Ok(())
        };
        for _ in 0..sequences {
            let len = rng.random_range(1..=max_len.max(1));
            run(&random_valid_sequence(&mut rng, len))?;
        }
        run(&greedy_sequence(max_len.max(1)))?;
        out.push(check);
    }
    for horizon in [1.0, 2.0, 5.0, 10.0] {
        for eps in [0.05, 0.5, 1.0] {
            let failures = u64::from(alpha_lemma_sweep(t_max, eps, horizon).is_some());
            out.push(LemmaCheck { name: format!("learning rate H={horizon} eps={eps}"), cases: t_max, failures });
        }
    }
    Ok(out)
}
