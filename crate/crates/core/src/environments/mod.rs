//! Tabular MDPs, the benchmark builders and exact planning oracles.

mod builders;
mod oracles;
mod text;

use rand::Rng;
use thiserror::Error;

use crate::distributions::{DistError, RewardDist};

pub use builders::{double_chain, lower_bound_mdp, six_arms, DoubleChainParams, SixArmsParams, DASHED, SOLID};
pub use oracles::{
    episodic_optimal_value, finite_horizon_values, optimal_gain, optimal_gain_with, FiniteHorizonValues, GainSolution,
    DEFAULT_MAX_ITERATIONS, DEFAULT_TOL,
};
pub use text::{parse_mdp, write_mdp};

/// Row sums must match 1 to this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange { what: &'static str, index: usize, size: usize },
    #[error("transition row ({state}, {action}) is not a probability vector (sum {sum})")]
    NotStochastic { state: usize, action: usize, sum: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("value iteration did not converge after {iterations} iterations (span {span:e}); is the MDP communicating?")]
    NoConvergence { iterations: usize, span: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fixed(usize),
    Distribution(Vec<f64>),
}

/// Finite MDP with a transition tensor `[S][A][S]` and one reward law per `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMDP {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    cumulative: Vec<f64>,
    rewards: Vec<RewardDist>,
    mean_rewards: Vec<f64>,
    initial: InitialState,
}

impl TabularMDP {
    /// `transitions` is flattened `[s][a][s']`, `rewards` is `[s][a]`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<RewardDist>,
        initial: InitialState,
    ) -> Result<Self, EnvError> {
        if n_states == 0 || n_actions == 0 {
            return Err(EnvError::InvalidParameter("need at least one state and one action".into()));
        }
        if transitions.len() != n_states * n_actions * n_states {
            return Err(EnvError::InvalidParameter(format!(
                "transition tensor has {} entries, expected {}",
                transitions.len(),
                n_states * n_actions * n_states
            )));
        }
        if rewards.len() != n_states * n_actions {
            return Err(EnvError::InvalidParameter(format!(
                "reward table has {} entries, expected {}",
                rewards.len(),
                n_states * n_actions
            )));
        }
        for (row_index, row) in transitions.chunks(n_states).enumerate() {
            let sum: f64 = row.iter().sum();
            let in_range = row.iter().all(|&p| (0.0..=1.0).contains(&p));
            if !in_range || (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(EnvError::NotStochastic { state: row_index / n_actions, action: row_index % n_actions, sum });
            }
        }
        for dist in &rewards {
            dist.validate()?;
        }
        match &initial {
            InitialState::Fixed(s) if *s >= n_states => {
                return Err(EnvError::IndexOutOfRange { what: "initial state", index: *s, size: n_states })
            }
            InitialState::Distribution(d) => {
                let sum: f64 = d.iter().sum();
                if d.len() != n_states || d.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(EnvError::InvalidParameter("initial distribution is not a probability vector".into()));
                }
            }
            _ => {}
        }
        let mut cumulative = Vec::with_capacity(transitions.len());
        for row in transitions.chunks(n_states) {
            let mut acc = 0.0;
            for &p in row {
                acc += p;
                cumulative.push(acc);
            }
        }
        let mean_rewards = rewards.iter().map(RewardDist::mean).collect();
        Ok(TabularMDP { n_states, n_actions, transitions, cumulative, rewards, mean_rewards, initial })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// `P(. | s, a)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn reward_dist(&self, s: usize, a: usize) -> &RewardDist {
        &self.rewards[s * self.n_actions + a]
    }

    pub fn reward_dists(&self) -> &[RewardDist] {
        &self.rewards
    }

    pub fn mean_reward(&self, s: usize, a: usize) -> f64 {
        self.mean_rewards[s * self.n_actions + a]
    }

    /// Mean rewards flattened `[s][a]`.
    pub fn mean_rewards(&self) -> &[f64] {
        &self.mean_rewards
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.initial {
            InitialState::Fixed(s) => *s,
            InitialState::Distribution(d) => sample_index(d.iter().copied(), rng.random::<f64>(), d.len()),
        }
    }

    pub fn check_indices(&self, s: usize, a: usize) -> Result<(), EnvError> {
        if s >= self.n_states {
            return Err(EnvError::IndexOutOfRange { what: "state", index: s, size: self.n_states });
        }
        if a >= self.n_actions {
            return Err(EnvError::IndexOutOfRange { what: "action", index: a, size: self.n_actions });
        }
        Ok(())
    }

    /// Samples `s' ~ P(. | s, a)` and `r ~ R(s, a)`.
    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<(usize, f64), EnvError> {
        let next = self.sample_next(s, a, rng)?;
        let reward = self.rewards[s * self.n_actions + a].sample(rng);
        Ok((next, reward))
    }

    /// Samples `s' ~ P(. | s, a)` with one uniform draw.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<usize, EnvError> {
        self.check_indices(s, a)?;
        let start = (s * self.n_actions + a) * self.n_states;
        let cdf = &self.cumulative[start..start + self.n_states];
        let x = rng.random::<f64>();
        Ok(cdf.iter().position(|&c| x < c).unwrap_or_else(|| last_positive(self.row(s, a))))
    }

    /// Samples `r ~ R(s, a)`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<f64, EnvError> {
        self.check_indices(s, a)?;
        Ok(self.rewards[s * self.n_actions + a].sample(rng))
    }

    /// Same dynamics with every reward law replaced by `f(s, a, dist)`.
    pub fn map_rewards(&self, mut f: impl FnMut(usize, usize, &RewardDist) -> RewardDist) -> Result<Self, EnvError> {
        let rewards = (0..self.n_states * self.n_actions)
            .map(|i| f(i / self.n_actions, i % self.n_actions, &self.rewards[i]))
            .collect();
        TabularMDP::new(self.n_states, self.n_actions, self.transitions.clone(), rewards, self.initial.clone())
    }

    /// Largest and smallest mean reward.
    pub fn mean_reward_range(&self) -> (f64, f64) {
        let max = self.mean_rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.mean_rewards.iter().copied().fold(f64::INFINITY, f64::min);
        (min, max)
    }
}

fn sample_index(probs: impl Iterator<Item = f64>, x: f64, len: usize) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if x < acc {
            return i;
        }
    }
    last.min(len - 1)
}

// Guards the round-off case where the cumulative sum ends just below 1.
fn last_positive(row: &[f64]) -> usize {
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Finite-horizon MDP: one kernel shared by all steps, or one per step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodicMDP {
    kernels: Vec<TabularMDP>,
    horizon: usize,
    episodes: u64,
}

impl EpisodicMDP {
    pub fn stationary(mdp: TabularMDP, horizon: usize, episodes: u64) -> Result<Self, EnvError> {
        Self::new(vec![mdp], horizon, episodes)
    }

    /// `kernels` holds either one MDP for every step or exactly `horizon` of them.
    pub fn new(kernels: Vec<TabularMDP>, horizon: usize, episodes: u64) -> Result<Self, EnvError> {
        if horizon == 0 {
            return Err(EnvError::InvalidParameter("horizon must be at least 1".into()));
        }
        if kernels.len() != 1 && kernels.len() != horizon {
            return Err(EnvError::InvalidParameter(format!("expected 1 or {horizon} kernels, got {}", kernels.len())));
        }
        let (s, a) = (kernels[0].n_states(), kernels[0].n_actions());
        if kernels.iter().any(|k| k.n_states() != s || k.n_actions() != a) {
            return Err(EnvError::InvalidParameter("step kernels disagree on state/action counts".into()));
        }
        Ok(EpisodicMDP { kernels, horizon, episodes })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Kernel used at step `h` (0-based).
    pub fn kernel(&self, h: usize) -> &TabularMDP {
        if self.kernels.len() == 1 {
            &self.kernels[0]
        } else {
            &self.kernels[h]
        }
    }

    pub fn n_states(&self) -> usize {
        self.kernels[0].n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.kernels[0].n_actions()
    }
}

/// MDP that switches to a new member at fixed global steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangingMDP {
    segments: Vec<(u64, TabularMDP)>,
}

impl ChangingMDP {
    /// `segments` pairs a switch step with the MDP active from that step on.
    /// The first switch step must be 0.
    pub fn new(segments: Vec<(u64, TabularMDP)>) -> Result<Self, EnvError> {
        let Some((first, base)) = segments.first() else {
            return Err(EnvError::InvalidParameter("changing MDP needs at least one member".into()));
        };
        if *first != 0 {
            return Err(EnvError::InvalidParameter("first member must start at step 0".into()));
        }
        if segments.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(EnvError::InvalidParameter("switch times must be strictly increasing".into()));
        }
        if segments.iter().any(|(_, m)| m.n_states() != base.n_states() || m.n_actions() != base.n_actions()) {
            return Err(EnvError::InvalidParameter("all members must share state and action counts".into()));
        }
        Ok(ChangingMDP { segments })
    }

    pub fn segments(&self) -> &[(u64, TabularMDP)] {
        &self.segments
    }

    /// Number of distinct MDPs.
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Index of the member active at global step `t` (0-based).
    pub fn segment_at(&self, t: u64) -> usize {
        self.segments.partition_point(|(start, _)| *start <= t) - 1
    }

    pub fn model_at(&self, t: u64) -> &TabularMDP {
        &self.segments[self.segment_at(t)].1
    }
}

/// Any environment the harness can drive.
#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Stationary(TabularMDP),
    Changing(ChangingMDP),
}

impl Environment {
    pub fn model_at(&self, t: u64) -> &TabularMDP {
        match self {
            Environment::Stationary(m) => m,
            Environment::Changing(c) => c.model_at(t),
        }
    }

    pub fn base(&self) -> &TabularMDP {
        self.model_at(0)
    }

    pub fn n_states(&self) -> usize {
        self.base().n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.base().n_actions()
    }

    /// All member models with the step at which each becomes active.
    pub fn members(&self) -> Vec<(u64, &TabularMDP)> {
        match self {
            Environment::Stationary(m) => vec![(0, m)],
            Environment::Changing(c) => c.segments().iter().map(|(t, m)| (*t, m)).collect(),
        }
    }
}
