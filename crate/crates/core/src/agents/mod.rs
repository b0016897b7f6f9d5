//! Learning agents behind one [`Agent`] interface.
//!
//! The harness calls [`Agent::act`] in the current state, samples the
//! environment, then feeds the transition back through [`Agent::observe`].
//! When an episodic run resets the environment it calls
//! [`Agent::end_episode`]. Model-based learners ([`HeavyUcrl2`], [`Psrl`] in
//! continuing mode) keep their statistics across resets; the episodic
//! learners ([`HeavyQ`], [`Psrl`] in episodic mode) index by the step `h`.

mod evi;
mod psrl;
mod qlearning;
mod restart;
mod ucrl2;

use thiserror::Error;

use crate::environments::EnvError;
use crate::estimators::EstimatorError;
use crate::SimRng;

pub use evi::{extended_value_iteration, inner_max, EviSolution, DEFAULT_EVI_MAX_ITERATIONS};
pub use psrl::{Psrl, PsrlMode, PsrlParams};
pub use qlearning::{BonusKind, HeavyQ, HeavyQParams};
pub use restart::{restart_steps, RestartSchedule, Restarting};
pub use ucrl2::{HeavyUcrl2, RewardCi, Ucrl2Params};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange { what: &'static str, index: usize, size: usize },
    #[error("invalid agent parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// One observed step. `step` is the 0-based position inside the current
/// episode (always 0 for continuing runs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub step: usize,
}

pub trait Agent: Send {
    /// Action to take in `state` at 0-based episode step `step`.
    fn act(&mut self, state: usize, step: usize, rng: &mut SimRng) -> Result<usize, AgentError>;

    fn observe(&mut self, transition: &Transition) -> Result<(), AgentError>;

    /// The environment was reset to its initial state.
    fn end_episode(&mut self) {}
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn act(&mut self, state: usize, step: usize, rng: &mut SimRng) -> Result<usize, AgentError> {
        (**self).act(state, step, rng)
    }

    fn observe(&mut self, transition: &Transition) -> Result<(), AgentError> {
        (**self).observe(transition)
    }

    fn end_episode(&mut self) {
        (**self).end_episode()
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_index(what: &'static str, index: usize, size: usize) -> Result<(), AgentError> {
    if index < size {
        Ok(())
    } else {
        Err(AgentError::IndexOutOfRange { what, index, size })
    }
}

pub(crate) fn check_transition(t: &Transition, n_states: usize, n_actions: usize) -> Result<(), AgentError> {
    check_index("state", t.state, n_states)?;
    check_index("action", t.action, n_actions)?;
    check_index("next state", t.next_state, n_states)?;
    if !t.reward.is_finite() {
        return Err(AgentError::Estimator(EstimatorError::NonFiniteSample(t.reward)));
    }
    Ok(())
}

pub(crate) fn check_unit_interval(name: &str, x: f64, closed_right: bool) -> Result<(), AgentError> {
    let ok = x > 0.0 && (x < 1.0 || (closed_right && x == 1.0));
    if ok {
        Ok(())
    } else {
        Err(AgentError::InvalidParameter(format!("{name} = {x} out of range")))
    }
}
