//! Heavy-UCRL2 and the empirical-mean UCRL2 baselines.

use serde::{Deserialize, Serialize};

use super::evi::{extended_value_iteration, DEFAULT_EVI_MAX_ITERATIONS};
use super::{check_transition, check_unit_interval, Agent, AgentError, Transition};
use crate::estimators::{EstimatorKind, EstimatorParams, RobustAccumulator};
use crate::SimRng;

/// Reward confidence interval used when building the optimistic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardCi {
    /// Robust estimator with radius
    /// `v^(1/(1+eps)) (7 c log(2SAt_k/delta) / max(1, N))^(eps/(1+eps))`.
    Robust,
    /// Empirical mean with the bounded-reward radius
    /// `range * sqrt(7 log(2SAt_k/delta) / (2 max(1, N)))`. Too narrow for heavy tails.
    Subgaussian,
    /// Empirical mean with the heavy-tail radius `(3v / (delta_k N^eps))^(1/(1+eps))`,
    /// `delta_k = delta / (2SAt_k)`. Valid but polynomial in `t_k`.
    Valid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ucrl2Params {
    pub n_states: usize,
    pub n_actions: usize,
    pub delta: f64,
    pub eps: f64,
    /// Robust estimator (truncated mean or median-of-means) for [`RewardCi::Robust`].
    pub estimator: EstimatorKind,
    /// Raw moment bound, used for the truncation threshold.
    pub u: f64,
    /// Centred moment bound, used by every reward interval width.
    pub v: f64,
    pub conf_scale: f64,
    pub reward_ci: RewardCi,
    /// Reward range of the sub-Gaussian radius.
    pub reward_range: f64,
    pub max_evi_iterations: usize,
}

impl Ucrl2Params {
    /// Heavy-UCRL2 with the truncated mean.
    pub fn heavy(n_states: usize, n_actions: usize, delta: f64, eps: f64, u: f64, v: f64) -> Self {
        Ucrl2Params {
            n_states,
            n_actions,
            delta,
            eps,
            estimator: EstimatorKind::Truncated,
            u,
            v,
            conf_scale: 1.0,
            reward_ci: RewardCi::Robust,
            reward_range: 1.0,
            max_evi_iterations: DEFAULT_EVI_MAX_ITERATIONS,
        }
    }

    /// Empirical-mean UCRL2 with the given reward interval.
    pub fn vanilla(n_states: usize, n_actions: usize, delta: f64, reward_ci: RewardCi, eps: f64, v: f64) -> Self {
        Ucrl2Params { estimator: EstimatorKind::Empirical, reward_ci, ..Self::heavy(n_states, n_actions, delta, eps, v, v) }
    }

    pub fn with_conf_scale(mut self, conf_scale: f64) -> Self {
        self.conf_scale = conf_scale;
        self
    }

    fn estimator_params(&self) -> EstimatorParams {
        let kind = match self.reward_ci {
            RewardCi::Robust => self.estimator,
            RewardCi::Subgaussian | RewardCi::Valid => EstimatorKind::Empirical,
        };
        let pairs = (self.n_states * self.n_actions) as f64;
        let mut p = EstimatorParams::new(kind, self.eps, self.u, self.v, self.delta / (2.0 * pairs));
        p.conf_scale = self.conf_scale;
        p.range = self.reward_range;
        p
    }

    fn validate(&self) -> Result<(), AgentError> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(AgentError::InvalidParameter("need at least one state and one action".into()));
        }
        check_unit_interval("delta", self.delta, false)?;
        if self.reward_ci == RewardCi::Robust && self.estimator == EstimatorKind::Empirical {
            return Err(AgentError::InvalidParameter("robust reward interval needs a robust estimator".into()));
        }
        if self.reward_ci == RewardCi::Valid && !(self.v > 0.0 && self.v.is_finite()) {
            return Err(AgentError::InvalidParameter(format!("centred moment bound v = {} must be positive", self.v)));
        }
        self.estimator_params().validate()?;
        Ok(())
    }
}

/// UCRL2 with a pluggable reward interval. With [`RewardCi::Robust`] this is
/// Heavy-UCRL2.
///
/// Episodes follow the doubling rule: once some pair has been visited
/// `max(1, N_k(s, a))` times within the episode, the next call to
/// [`Agent::act`] recomputes the optimistic policy.
#[derive(Debug, Clone)]
pub struct HeavyUcrl2 {
    params: Ucrl2Params,
    rewards: Vec<RobustAccumulator>,
    counts: Vec<u64>,
    episode_start_counts: Vec<u64>,
    episode_counts: Vec<u64>,
    transitions: Vec<u64>,
    steps: u64,
    episode_start: u64,
    episodes: u64,
    policy: Vec<usize>,
    needs_plan: bool,
    optimistic_gain: f64,
}

impl HeavyUcrl2 {
    pub fn new(params: Ucrl2Params) -> Result<Self, AgentError> {
        params.validate()?;
        let pairs = params.n_states * params.n_actions;
        let acc = RobustAccumulator::new(params.estimator_params())?;
        Ok(HeavyUcrl2 {
            rewards: vec![acc; pairs],
            counts: vec![0; pairs],
            episode_start_counts: vec![0; pairs],
            episode_counts: vec![0; pairs],
            transitions: vec![0; pairs * params.n_states],
            steps: 0,
            episode_start: 1,
            episodes: 0,
            policy: vec![0; params.n_states],
            needs_plan: true,
            optimistic_gain: f64::NAN,
            params,
        })
    }

    pub fn params(&self) -> &Ucrl2Params {
        &self.params
    }

    /// Number of episodes started so far.
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// `t_k`, the 1-based step at which the current episode started.
    pub fn episode_start(&self) -> u64 {
        self.episode_start
    }

    /// Total visits to every pair, `[s][a]`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Optimistic gain found by the last planning step (NaN before the first).
    pub fn optimistic_gain(&self) -> f64 {
        self.optimistic_gain
    }

    pub fn policy(&self) -> &[usize] {
        &self.policy
    }

    /// True when the next [`Agent::act`] starts a new episode.
    pub fn episode_pending(&self) -> bool {
        self.needs_plan
    }

    /// Reward interval half-width for a pair seen `n` times, evaluated at `t_k`.
    pub fn reward_radius(&self, n: u64, t_k: u64) -> f64 {
        let p = &self.params;
        let n = n.max(1) as f64;
        let pairs = (p.n_states * p.n_actions) as f64;
        let log_term = (2.0 * pairs * t_k as f64 / p.delta).ln();
        let width = match p.reward_ci {
            RewardCi::Robust => {
                let c = p.estimator.robust_constant(p.eps).expect("validated robust estimator");
                p.v.powf(1.0 / (1.0 + p.eps)) * (7.0 * c * log_term / n).powf(p.eps / (1.0 + p.eps))
            }
            RewardCi::Subgaussian => p.reward_range * (7.0 * log_term / (2.0 * n)).sqrt(),
            RewardCi::Valid => {
                let delta_k = p.delta / (2.0 * pairs * t_k as f64);
                (3.0 * p.v / (delta_k * n.powf(p.eps))).powf(1.0 / (1.0 + p.eps))
            }
        };
        p.conf_scale * width
    }

    /// L1 radius of the transition ball for a pair seen `n` times, evaluated at `t_k`.
    pub fn transition_radius(&self, n: u64, t_k: u64) -> f64 {
        let p = &self.params;
        let log_term = (2.0 * p.n_actions as f64 * t_k as f64 / p.delta).ln();
        p.conf_scale * (14.0 * p.n_states as f64 * log_term / n.max(1) as f64).sqrt()
    }

    /// Point estimate of the mean reward (0 for unvisited pairs).
    pub fn reward_estimate(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.params.n_actions + a].mean().unwrap_or(0.0)
    }

    /// Empirical transition row (uniform for unvisited pairs).
    pub fn transition_estimate(&self, s: usize, a: usize) -> Vec<f64> {
        let n_states = self.params.n_states;
        let i = s * self.params.n_actions + a;
        let n = self.counts[i];
        if n == 0 {
            return vec![1.0 / n_states as f64; n_states];
        }
        self.transitions[i * n_states..(i + 1) * n_states].iter().map(|&c| c as f64 / n as f64).collect()
    }

    /// Starts episode `k` at the current step: freezes `N_k`, builds the
    /// confidence sets and solves the optimistic model.
    pub fn begin_episode(&mut self) -> Result<(), AgentError> {
        let (n_states, n_actions) = (self.params.n_states, self.params.n_actions);
        let t_k = self.steps + 1;
        self.episode_start = t_k;
        self.episode_start_counts.copy_from_slice(&self.counts);
        self.episode_counts.iter_mut().for_each(|c| *c = 0);
        let pairs = n_states * n_actions;
        let mut r_tilde = Vec::with_capacity(pairs);
        let mut p_hat = Vec::with_capacity(pairs * n_states);
        let mut p_radius = Vec::with_capacity(pairs);
        for s in 0..n_states {
            for a in 0..n_actions {
                let n = self.counts[s * n_actions + a];
                r_tilde.push(self.reward_estimate(s, a) + self.reward_radius(n, t_k));
                p_hat.extend(self.transition_estimate(s, a));
                p_radius.push(self.transition_radius(n, t_k));
            }
        }
        let slack = 1.0 / (t_k as f64).sqrt();
        let sol = extended_value_iteration(
            n_states,
            n_actions,
            &r_tilde,
            &p_hat,
            &p_radius,
            slack,
            self.params.max_evi_iterations,
        )?;
        self.policy = sol.policy;
        self.optimistic_gain = sol.gain;
        self.episodes += 1;
        self.needs_plan = false;
        Ok(())
    }
}

impl Agent for HeavyUcrl2 {
    fn act(&mut self, state: usize, _step: usize, _rng: &mut SimRng) -> Result<usize, AgentError> {
        super::check_index("state", state, self.params.n_states)?;
        if self.needs_plan {
            self.begin_episode()?;
        }
        Ok(self.policy[state])
    }

    fn observe(&mut self, tr: &Transition) -> Result<(), AgentError> {
        let (n_states, n_actions) = (self.params.n_states, self.params.n_actions);
        check_transition(tr, n_states, n_actions)?;
        let i = tr.state * n_actions + tr.action;
        self.rewards[i].add_sample(tr.reward)?;
        self.counts[i] += 1;
        self.transitions[i * n_states + tr.next_state] += 1;
        self.episode_counts[i] += 1;
        self.steps += 1;
        if self.episode_counts[i] >= self.episode_start_counts[i].max(1) {
            self.needs_plan = true;
        }
        Ok(())
    }
}
