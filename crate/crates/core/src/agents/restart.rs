//! Restart schedule for MDPs that change a bounded number of times.

use super::{Agent, AgentError, Transition};
use crate::SimRng;

/// Restart steps `tau_i = ceil(i^((1+2eps)/eps) / l^((1+eps)/eps))`, with
/// duplicates dropped so the sequence is strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartSchedule {
    /// Change budget `l`: the MDP may change up to `l - 1` times.
    pub change_budget: u64,
    pub eps: f64,
}

impl RestartSchedule {
    pub fn new(change_budget: u64, eps: f64) -> Result<Self, AgentError> {
        if change_budget == 0 {
            return Err(AgentError::InvalidParameter("change budget must be at least 1".into()));
        }
        super::check_unit_interval("eps", eps, true)?;
        Ok(RestartSchedule { change_budget, eps })
    }

    /// `tau_i` before deduplication, saturating at `u64::MAX`.
    pub fn raw_step(&self, i: u64) -> u64 {
        let e = self.eps;
        let x = (i as f64).powf((1.0 + 2.0 * e) / e) / (self.change_budget as f64).powf((1.0 + e) / e);
        // Snap values that are integers up to round-off before taking the ceiling.
        let nearest = x.round();
        let tau = if (x - nearest).abs() <= 1e-12 * nearest.max(1.0) { nearest } else { x.ceil() };
        if tau >= u64::MAX as f64 {
            u64::MAX
        } else {
            tau.max(1.0) as u64
        }
    }

    /// Confidence parameter handed to every restarted learner, `delta / l^2`.
    pub fn inner_delta(&self, delta: f64) -> f64 {
        delta / (self.change_budget as f64).powi(2)
    }

    /// Iterator over the deduplicated restart steps.
    pub fn steps(&self) -> RestartSteps {
        RestartSteps { schedule: *self, i: 0, last: 0 }
    }
}

/// Deduplicated restart steps, see [`RestartSchedule::steps`].
#[derive(Debug, Clone)]
pub struct RestartSteps {
    schedule: RestartSchedule,
    i: u64,
    last: u64,
}

impl Iterator for RestartSteps {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.last == u64::MAX {
            return None;
        }
        loop {
            self.i += 1;
            let tau = self.schedule.raw_step(self.i);
            if tau > self.last {
                self.last = tau;
                return Some(tau);
            }
        }
    }
}

/// Restart steps no larger than `limit`.
pub fn restart_steps(change_budget: u64, eps: f64, limit: u64) -> Result<Vec<u64>, AgentError> {
    Ok(RestartSchedule::new(change_budget, eps)?.steps().take_while(|&t| t <= limit).collect())
}

type Factory = Box<dyn Fn(f64) -> Result<Box<dyn Agent>, AgentError> + Send>;

/// Rebuilds its inner learner from scratch at every scheduled step. The
/// first learner is built at step 1 (which is always `tau_1`).
pub struct Restarting {
    factory: Factory,
    inner: Box<dyn Agent>,
    inner_delta: f64,
    steps: RestartSteps,
    next_restart: u64,
    completed: u64,
    restarts: u64,
}

impl Restarting {
    /// `factory` receives the confidence parameter `delta / l^2`.
    pub fn new(
        schedule: RestartSchedule,
        delta: f64,
        factory: impl Fn(f64) -> Result<Box<dyn Agent>, AgentError> + Send + 'static,
    ) -> Result<Self, AgentError> {
        let inner_delta = schedule.inner_delta(delta);
        let inner = factory(inner_delta)?;
        let mut steps = schedule.steps();
        let first = steps.next().unwrap_or(u64::MAX);
        debug_assert_eq!(first, 1);
        let next_restart = steps.next().unwrap_or(u64::MAX);
        Ok(Restarting { factory: Box::new(factory), inner, inner_delta, steps, next_restart, completed: 0, restarts: 0 })
    }

    /// Restarts performed so far (the initial build is not counted).
    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    pub fn inner_delta(&self) -> f64 {
        self.inner_delta
    }
}

impl Agent for Restarting {
    fn act(&mut self, state: usize, step: usize, rng: &mut SimRng) -> Result<usize, AgentError> {
        let t = self.completed + 1;
        if t >= self.next_restart {
            self.inner = (self.factory)(self.inner_delta)?;
            self.restarts += 1;
            while self.next_restart <= t {
                self.next_restart = self.steps.next().unwrap_or(u64::MAX);
            }
        }
        self.inner.act(state, step, rng)
    }

    fn observe(&mut self, transition: &Transition) -> Result<(), AgentError> {
        self.completed += 1;
        self.inner.observe(transition)
    }

    fn end_episode(&mut self) {
        self.inner.end_episode()
    }
}
