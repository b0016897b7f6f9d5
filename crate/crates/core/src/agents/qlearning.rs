//! Heavy-Q-Learning and optimistic Q-learning for episodic MDPs.

use serde::{Deserialize, Serialize};

use super::{argmax, check_index, check_transition, check_unit_interval, Agent, AgentError, Transition};
use crate::SimRng;

/// Base exploration bonus, scaled by `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BonusKind {
    /// `c r_max sqrt(H^3 iota / t)`.
    Hoeffding {
        #[serde(default = "one")]
        c: f64,
    },
    /// Per-step bonus derived from `beta_t`, which uses the empirical
    /// variance `W_t` of the next-state values.
    Bernstein {
        #[serde(default = "one")]
        c1: f64,
        #[serde(default = "two")]
        c2: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

impl Default for BonusKind {
    fn default() -> Self {
        BonusKind::Hoeffding { c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeavyQParams {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    /// Number of episodes K; `T = K H` enters `iota`.
    pub episodes: u64,
    pub delta: f64,
    pub eps: f64,
    /// Raw moment bound of the rewards.
    pub u: f64,
    /// Largest mean reward; Q starts at `H r_max` and V is capped there.
    pub r_max: f64,
    pub bonus: BonusKind,
    /// Constant in front of the heavy-tail bonus term.
    pub heavy_constant: f64,
    pub conf_scale: f64,
    /// Overrides `iota = log(2SAT/delta)`.
    pub iota: Option<f64>,
    /// Truncate rewards and add the heavy-tail bonus. Off gives plain
    /// optimistic Q-learning.
    pub heavy: bool,
}

impl HeavyQParams {
    /// Heavy-Q-Learning with the Hoeffding bonus.
    #[allow(clippy::too_many_arguments)]
    pub fn heavy(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        episodes: u64,
        delta: f64,
        eps: f64,
        u: f64,
        r_max: f64,
    ) -> Self {
        HeavyQParams {
            n_states,
            n_actions,
            horizon,
            episodes,
            delta,
            eps,
            u,
            r_max,
            bonus: BonusKind::default(),
            heavy_constant: 8.0,
            conf_scale: 1.0,
            iota: None,
            heavy: true,
        }
    }

    /// Optimistic Q-learning without truncation or heavy-tail term.
    pub fn vanilla(n_states: usize, n_actions: usize, horizon: usize, episodes: u64, delta: f64, r_max: f64) -> Self {
        HeavyQParams { heavy: false, ..Self::heavy(n_states, n_actions, horizon, episodes, delta, 1.0, 1.0, r_max) }
    }

    pub fn with_conf_scale(mut self, conf_scale: f64) -> Self {
        self.conf_scale = conf_scale;
        self
    }

    pub fn iota(&self) -> f64 {
        self.iota.unwrap_or_else(|| {
            let t = self.episodes as f64 * self.horizon as f64;
            (2.0 * (self.n_states * self.n_actions) as f64 * t / self.delta).ln()
        })
    }

    fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::InvalidParameter(m));
        if self.n_states == 0 || self.n_actions == 0 || self.horizon == 0 || self.episodes == 0 {
            return bad("S, A, H and K must be positive".into());
        }
        check_unit_interval("delta", self.delta, false)?;
        check_unit_interval("eps", self.eps, true)?;
        if !(self.conf_scale > 0.0 && self.conf_scale.is_finite()) {
            return bad(format!("conf_scale = {}", self.conf_scale));
        }
        if self.heavy && !(self.u > 0.0 && self.u.is_finite()) {
            return bad(format!("raw moment bound u = {} must be positive", self.u));
        }
        if !self.r_max.is_finite() {
            return bad(format!("r_max = {}", self.r_max));
        }
        if self.iota().is_nan() || self.iota() <= 0.0 {
            return bad(format!("iota = {} must be positive", self.iota()));
        }
        Ok(())
    }
}

/// Tabular Q-learning with learning rate `(H + 1) / (H + t)` and optimistic
/// initialisation `H r_max`, plus reward truncation and a heavy-tail bonus
/// when `heavy` is set. Steps are 0-based: `q[h]` is used at step `h` and
/// `V[H] = 0`.
#[derive(Debug, Clone)]
pub struct HeavyQ {
    params: HeavyQParams,
    iota: f64,
    q: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    counts: Vec<Vec<u64>>,
    next_value_sum: Vec<Vec<f64>>,
    next_value_sq_sum: Vec<Vec<f64>>,
    prev_beta: Vec<Vec<f64>>,
}

impl HeavyQ {
    pub fn new(params: HeavyQParams) -> Result<Self, AgentError> {
        params.validate()?;
        let (h, s, a) = (params.horizon, params.n_states, params.n_actions);
        let cap = h as f64 * params.r_max;
        let mut v = vec![vec![cap; s]; h + 1];
        v[h].iter_mut().for_each(|x| *x = 0.0);
        let bernstein = matches!(params.bonus, BonusKind::Bernstein { .. });
        let stats = if bernstein { vec![vec![0.0; s * a]; h] } else { Vec::new() };
        Ok(HeavyQ {
            iota: params.iota(),
            q: vec![vec![cap; s * a]; h],
            v,
            counts: vec![vec![0; s * a]; h],
            next_value_sum: stats.clone(),
            next_value_sq_sum: stats.clone(),
            prev_beta: stats,
            params,
        })
    }

    pub fn params(&self) -> &HeavyQParams {
        &self.params
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    /// `Q_h(s, a)`, 0-based `h`.
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[h][s * self.params.n_actions + a]
    }

    /// `V_h(s)` for `h` in `0..=H`.
    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.v[h][s]
    }

    pub fn count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.counts[h][s * self.params.n_actions + a]
    }

    /// Learning rate `(H + 1) / (H + t)`.
    pub fn learning_rate(&self, t: u64) -> f64 {
        let h = self.params.horizon as f64;
        (h + 1.0) / (h + t as f64)
    }

    /// Truncation threshold `B_t = (u t / iota)^(1/(1+eps))`.
    pub fn threshold(&self, t: u64) -> f64 {
        (self.params.u * t as f64 / self.iota).powf(1.0 / (1.0 + self.params.eps))
    }

    /// Hoeffding base bonus `c r_max sqrt(H^3 iota / t)`.
    pub fn hoeffding_bonus(&self, c: f64, t: u64) -> f64 {
        let h = self.params.horizon as f64;
        c * self.params.r_max * (h.powi(3) * self.iota / t as f64).sqrt()
    }

    /// Heavy-tail term `heavy_constant H u^(1/(1+eps)) (iota / t)^(eps/(1+eps))`.
    pub fn heavy_bonus(&self, t: u64) -> f64 {
        let p = &self.params;
        p.heavy_constant * p.horizon as f64 * p.u.powf(1.0 / (1.0 + p.eps)) * (self.iota / t as f64).powf(p.eps / (1.0 + p.eps))
    }

    /// `beta'_t` of the Bernstein bonus for empirical variance `w`.
    pub fn bernstein_beta(&self, c1: f64, c2: f64, w: f64, t: u64) -> f64 {
        let p = &self.params;
        let (h, t, iota, r_max, eps) = (p.horizon as f64, t as f64, self.iota, p.r_max, p.eps);
        let sa = (p.n_states * p.n_actions) as f64;
        let r = r_max.max(0.0);
        let variance_term = (h * r * (w + h) * iota / t).sqrt()
            + (h.powi(7) * r * sa).sqrt() * iota / t
            + h * h * iota * r.powi(3).sqrt() / t
            + h.powf((1.0 + 2.0 * eps) / eps) * iota * (sa * eps).sqrt() / t;
        (c1 * variance_term).min(c2 * r_max * (h.powi(3) * iota / t).sqrt())
    }

    /// Empirical variance `W_t` of the next-state values seen at `(h, s, a)`.
    pub fn next_value_variance(&self, h: usize, s: usize, a: usize) -> f64 {
        let i = s * self.params.n_actions + a;
        let t = self.counts[h][i];
        if t == 0 || self.next_value_sum.is_empty() {
            return 0.0;
        }
        let mean = self.next_value_sum[h][i] / t as f64;
        (self.next_value_sq_sum[h][i] / t as f64 - mean * mean).max(0.0)
    }
}

impl Agent for HeavyQ {
    fn act(&mut self, state: usize, step: usize, _rng: &mut SimRng) -> Result<usize, AgentError> {
        check_index("step", step, self.params.horizon)?;
        check_index("state", state, self.params.n_states)?;
        let a = self.params.n_actions;
        Ok(argmax(&self.q[step][state * a..(state + 1) * a]))
    }

    fn observe(&mut self, tr: &Transition) -> Result<(), AgentError> {
        let (n_states, n_actions) = (self.params.n_states, self.params.n_actions);
        check_transition(tr, n_states, n_actions)?;
        let h = tr.step;
        check_index("step", h, self.params.horizon)?;
        let i = tr.state * n_actions + tr.action;
        self.counts[h][i] += 1;
        let t = self.counts[h][i];
        let alpha = self.learning_rate(t);
        let next_value = self.v[h + 1][tr.next_state];

        let base = match self.params.bonus {
            BonusKind::Hoeffding { c } => self.hoeffding_bonus(c, t),
            BonusKind::Bernstein { c1, c2 } => {
                self.next_value_sum[h][i] += next_value;
                self.next_value_sq_sum[h][i] += next_value * next_value;
                let w = self.next_value_variance(h, tr.state, tr.action);
                let beta = self.bernstein_beta(c1, c2, w, t);
                let prev = std::mem::replace(&mut self.prev_beta[h][i], beta);
                let b = if t == 1 { beta / 2.0 } else { (beta - (1.0 - alpha) * prev) / (2.0 * alpha) };
                b.max(0.0)
            }
        };
        let (reward, bonus) = if self.params.heavy {
            let r = if tr.reward.abs() <= self.threshold(t) { tr.reward } else { 0.0 };
            (r, base + self.heavy_bonus(t))
        } else {
            (tr.reward, base)
        };
        let bonus = self.params.conf_scale * bonus;

        let q = &mut self.q[h][i];
        *q = (1.0 - alpha) * *q + alpha * (reward + next_value + bonus);
        let best = self.q[h][tr.state * n_actions..(tr.state + 1) * n_actions].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.v[h][tr.state] = best.min(self.params.horizon as f64 * self.params.r_max);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(step: usize, state: usize, action: usize, reward: f64, next_state: usize) -> Transition {
        Transition { state, action, reward, next_state, step }
    }

    fn unit_params() -> HeavyQParams {
        let mut p = HeavyQParams::heavy(1, 1, 1, 1, 0.5, 1.0, 1.0, 1.0);
        p.iota = Some(1.0);
        p
    }

    #[test]
    fn first_update_overwrites_q() {
        // b_1 = 1, heavy term 8 * 1 * 1 * 1 = 8, B_1 = 1 so r = 0.5 is kept.
        let mut agent = HeavyQ::new(unit_params()).unwrap();
        assert_eq!(agent.learning_rate(1), 1.0);
        assert_eq!(agent.threshold(1), 1.0);
        agent.observe(&tr(0, 0, 0, 0.5, 0)).unwrap();
        assert_eq!(agent.q(0, 0, 0), 9.5);
        assert_eq!(agent.value(0, 0), 1.0);
    }

    #[test]
    fn truncated_reward_acts_like_zero() {
        let mut big = HeavyQ::new(unit_params()).unwrap();
        let mut zero = HeavyQ::new(unit_params()).unwrap();
        big.observe(&tr(0, 0, 0, 5.0, 0)).unwrap();
        zero.observe(&tr(0, 0, 0, 0.0, 0)).unwrap();
        assert_eq!(big.q(0, 0, 0), zero.q(0, 0, 0));
    }

    #[test]
    fn hoeffding_bonus_value() {
        let mut p = unit_params();
        p.iota = Some(1.0);
        let agent = HeavyQ::new(p).unwrap();
        assert_eq!(agent.hoeffding_bonus(1.0, 4), 0.5);
    }

    #[test]
    fn bernstein_is_clamped_by_hoeffding_form() {
        let mut p = HeavyQParams::heavy(3, 2, 5, 1000, 0.1, 0.5, 2.0, 1.0);
        p.bonus = BonusKind::Bernstein { c1: 1.0, c2: 2.0 };
        let agent = HeavyQ::new(p).unwrap();
        for t in [1u64, 10, 1_000, 1_000_000_000] {
            assert!(agent.bernstein_beta(1.0, 2.0, 0.0, t) <= agent.hoeffding_bonus(2.0, t) + 1e-12);
        }
    }

    #[test]
    fn constant_next_values_have_zero_variance() {
        let mut p = HeavyQParams::heavy(2, 1, 2, 10, 0.1, 1.0, 1.0, 1.0);
        p.bonus = BonusKind::Bernstein { c1: 1.0, c2: 2.0 };
        let mut agent = HeavyQ::new(p).unwrap();
        for _ in 0..5 {
            agent.observe(&tr(1, 0, 0, 0.0, 1)).unwrap();
        }
        assert_eq!(agent.next_value_variance(1, 0, 0), 0.0);
    }

    #[test]
    fn vanilla_matches_heavy_without_heavy_terms() {
        let mut heavy_params = HeavyQParams::heavy(2, 2, 3, 50, 0.1, 1.0, 1e300, 1.0);
        heavy_params.heavy_constant = 0.0;
        let mut vanilla_params = HeavyQParams::vanilla(2, 2, 3, 50, 0.1, 1.0);
        vanilla_params.eps = 1.0;
        let mut heavy = HeavyQ::new(heavy_params).unwrap();
        let mut vanilla = HeavyQ::new(vanilla_params).unwrap();
        let steps = [(0, 0, 1, 3.0, 1), (1, 1, 0, -7.5, 0), (2, 0, 0, 0.2, 1), (0, 0, 1, 100.0, 0)];
        for (h, s, a, r, n) in steps {
            heavy.observe(&tr(h, s, a, r, n)).unwrap();
            vanilla.observe(&tr(h, s, a, r, n)).unwrap();
        }
        for h in 0..3 {
            for s in 0..2 {
                for a in 0..2 {
                    assert_eq!(heavy.q(h, s, a), vanilla.q(h, s, a));
                }
            }
        }
    }

    #[test]
    fn learning_rate_and_value_cap() {
        let mut agent = HeavyQ::new(HeavyQParams::heavy(2, 2, 4, 10, 0.1, 0.5, 2.0, 1.5)).unwrap();
        assert_eq!(agent.learning_rate(3), 5.0 / 7.0);
        assert_eq!(agent.value(4, 1), 0.0);
        agent.observe(&tr(3, 1, 1, 0.0, 0)).unwrap();
        assert!(agent.value(3, 1) <= 4.0 * 1.5);
        let mut rng = <SimRng as rand::SeedableRng>::seed_from_u64(0);
        assert!(agent.act(0, 4, &mut rng).is_err());
    }
}
