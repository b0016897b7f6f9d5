//! Posterior sampling with a Gaussian reward model.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{check_index, check_transition, Agent, AgentError, Transition};
use crate::environments::{optimal_gain_with, DEFAULT_MAX_ITERATIONS};
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsrlMode {
    /// Resample at every episode start and plan by backward induction.
    Episodic { horizon: usize },
    /// Resample when the doubling rule fires and plan by relative value iteration.
    Continuing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsrlParams {
    pub n_states: usize,
    pub n_actions: usize,
    pub mode: PsrlMode,
    /// Multiplies the posterior standard deviation of the reward means.
    pub conf_scale: f64,
    pub prior_mean: f64,
    pub prior_variance: f64,
    /// Known observation variance of the Gaussian likelihood.
    pub noise_variance: f64,
    /// Dirichlet pseudo-count for every next state.
    pub dirichlet_prior: f64,
    pub planning_tol: f64,
}

impl PsrlParams {
    pub fn new(n_states: usize, n_actions: usize, mode: PsrlMode) -> Self {
        PsrlParams {
            n_states,
            n_actions,
            mode,
            conf_scale: 1.0,
            prior_mean: 0.0,
            prior_variance: 1.0,
            noise_variance: 1.0,
            dirichlet_prior: 1.0,
            planning_tol: 1e-6,
        }
    }

    pub fn with_conf_scale(mut self, conf_scale: f64) -> Self {
        self.conf_scale = conf_scale;
        self
    }
}

/// Gaussian PSRL: Normal posterior over each mean reward, Dirichlet
/// posterior over each transition row.
#[derive(Debug, Clone)]
pub struct Psrl {
    params: PsrlParams,
    reward_sums: Vec<f64>,
    counts: Vec<u64>,
    transitions: Vec<u64>,
    episode_start_counts: Vec<u64>,
    episode_counts: Vec<u64>,
    /// `policy[h][s]`; a single row in continuing mode.
    policy: Vec<Vec<usize>>,
    needs_sample: bool,
    samples_drawn: u64,
}

impl Psrl {
    pub fn new(params: PsrlParams) -> Result<Self, AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidParameter(m.into()));
        if params.n_states == 0 || params.n_actions == 0 {
            return bad("need at least one state and one action");
        }
        if let PsrlMode::Episodic { horizon: 0 } = params.mode {
            return bad("horizon must be positive");
        }
        if !(params.prior_variance > 0.0 && params.noise_variance > 0.0 && params.dirichlet_prior > 0.0) {
            return bad("prior and noise variances and the Dirichlet prior must be positive");
        }
        if !(params.conf_scale >= 0.0 && params.conf_scale.is_finite()) {
            return bad("conf_scale must be a non-negative number");
        }
        let pairs = params.n_states * params.n_actions;
        let rows = match params.mode {
            PsrlMode::Episodic { horizon } => horizon,
            PsrlMode::Continuing => 1,
        };
        Ok(Psrl {
            reward_sums: vec![0.0; pairs],
            counts: vec![0; pairs],
            transitions: vec![0; pairs * params.n_states],
            episode_start_counts: vec![0; pairs],
            episode_counts: vec![0; pairs],
            policy: vec![vec![0; params.n_states]; rows],
            needs_sample: true,
            samples_drawn: 0,
            params,
        })
    }

    /// Posterior mean and variance of the mean reward of `(s, a)`.
    pub fn reward_posterior(&self, s: usize, a: usize) -> (f64, f64) {
        let p = &self.params;
        let i = s * p.n_actions + a;
        let precision = 1.0 / p.prior_variance + self.counts[i] as f64 / p.noise_variance;
        let mean = (p.prior_mean / p.prior_variance + self.reward_sums[i] / p.noise_variance) / precision;
        (mean, 1.0 / precision)
    }

    /// Number of posterior samples drawn so far.
    pub fn samples_drawn(&self) -> u64 {
        self.samples_drawn
    }

    /// Draws `(rewards [s][a], transitions [s][a][s'])` from the posterior.
    pub fn sample_model(&self, rng: &mut SimRng) -> (Vec<f64>, Vec<f64>) {
        let (n_states, n_actions) = (self.params.n_states, self.params.n_actions);
        let mut rewards = Vec::with_capacity(n_states * n_actions);
        let mut trans = Vec::with_capacity(n_states * n_actions * n_states);
        for s in 0..n_states {
            for a in 0..n_actions {
                let (mean, var) = self.reward_posterior(s, a);
                let z: f64 = rng.sample(StandardNormal);
                rewards.push(mean + self.params.conf_scale * var.sqrt() * z);
                let i = s * n_actions + a;
                let start = trans.len();
                for &c in &self.transitions[i * n_states..(i + 1) * n_states] {
                    let g = Gamma::new(self.params.dirichlet_prior + c as f64, 1.0).expect("positive shape");
                    trans.push(g.sample(rng));
                }
                let row = &mut trans[start..];
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.iter_mut().for_each(|x| *x /= total);
                } else {
                    row.iter_mut().for_each(|x| *x = 1.0 / n_states as f64);
                }
            }
        }
        (rewards, trans)
    }

    fn resample(&mut self, rng: &mut SimRng) -> Result<(), AgentError> {
        let (n_states, n_actions) = (self.params.n_states, self.params.n_actions);
        let (rewards, trans) = self.sample_model(rng);
        match self.params.mode {
            PsrlMode::Episodic { horizon } => {
                let mut next_v = vec![0.0; n_states];
                for h in (0..horizon).rev() {
                    let mut v = vec![0.0; n_states];
                    for (s, vs) in v.iter_mut().enumerate() {
                        let mut best = f64::NEG_INFINITY;
                        for a in 0..n_actions {
                            let i = s * n_actions + a;
                            let row = &trans[i * n_states..(i + 1) * n_states];
                            let q = rewards[i] + row.iter().zip(&next_v).map(|(p, x)| p * x).sum::<f64>();
                            if q > best {
                                best = q;
                                self.policy[h][s] = a;
                            }
                        }
                        *vs = best;
                    }
                    next_v = v;
                }
            }
            PsrlMode::Continuing => {
                let sol = optimal_gain_with(
                    n_states,
                    n_actions,
                    &rewards,
                    &trans,
                    self.params.planning_tol,
                    DEFAULT_MAX_ITERATIONS,
                )?;
                self.policy[0] = sol.policy;
                self.episode_start_counts.copy_from_slice(&self.counts);
                self.episode_counts.iter_mut().for_each(|c| *c = 0);
            }
        }
        self.samples_drawn += 1;
        self.needs_sample = false;
        Ok(())
    }
}

impl Agent for Psrl {
    fn act(&mut self, state: usize, step: usize, rng: &mut SimRng) -> Result<usize, AgentError> {
        check_index("state", state, self.params.n_states)?;
        let row = match self.params.mode {
            PsrlMode::Episodic { horizon } => {
                check_index("step", step, horizon)?;
                step
            }
            PsrlMode::Continuing => 0,
        };
        if self.needs_sample {
            self.resample(rng)?;
        }
        Ok(self.policy[row][state])
    }

    fn observe(&mut self, tr: &Transition) -> Result<(), AgentError> {
        let (n_states, n_actions) = (self.params.n_states, self.params.n_actions);
        check_transition(tr, n_states, n_actions)?;
        let i = tr.state * n_actions + tr.action;
        self.reward_sums[i] += tr.reward;
        self.counts[i] += 1;
        self.transitions[i * n_states + tr.next_state] += 1;
        if self.params.mode == PsrlMode::Continuing {
            self.episode_counts[i] += 1;
            if self.episode_counts[i] >= self.episode_start_counts[i].max(1) {
                self.needs_sample = true;
            }
        }
        Ok(())
    }

    fn end_episode(&mut self) {
        if matches!(self.params.mode, PsrlMode::Episodic { .. }) {
            self.needs_sample = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tr(state: usize, action: usize, reward: f64, next_state: usize) -> Transition {
        Transition { state, action, reward, next_state, step: 0 }
    }

    #[test]
    fn posterior_mean_converges_to_observed_value() {
        let mut agent = Psrl::new(PsrlParams::new(1, 1, PsrlMode::Continuing)).unwrap();
        assert_eq!(agent.reward_posterior(0, 0), (0.0, 1.0));
        for _ in 0..99_999 {
            agent.observe(&tr(0, 0, 2.5, 0)).unwrap();
        }
        let (mean, var) = agent.reward_posterior(0, 0);
        assert!((mean - 2.5 * 99_999.0 / 100_000.0).abs() < 1e-9);
        assert!((var - 1e-5).abs() < 1e-15);
    }

    #[test]
    fn sampled_rows_are_distributions() {
        let mut agent = Psrl::new(PsrlParams::new(3, 2, PsrlMode::Episodic { horizon: 4 })).unwrap();
        agent.observe(&tr(0, 1, 1.0, 2)).unwrap();
        let mut rng = SimRng::seed_from_u64(5);
        let (r, p) = agent.sample_model(&mut rng);
        assert_eq!(r.len(), 6);
        for row in p.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn episodic_mode_resamples_each_episode() {
        let mut agent = Psrl::new(PsrlParams::new(2, 2, PsrlMode::Episodic { horizon: 2 })).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        agent.act(0, 0, &mut rng).unwrap();
        agent.act(1, 1, &mut rng).unwrap();
        assert_eq!(agent.samples_drawn(), 1);
        agent.end_episode();
        agent.act(0, 0, &mut rng).unwrap();
        assert_eq!(agent.samples_drawn(), 2);
        assert!(agent.act(0, 2, &mut rng).is_err());
    }

    #[test]
    fn learns_the_better_arm() {
        // One state, two actions with well separated Gaussian means.
        let mut agent = Psrl::new(PsrlParams::new(1, 2, PsrlMode::Continuing)).unwrap();
        let mut rng = SimRng::seed_from_u64(9);
        let mut good = 0;
        for t in 0..2_000 {
            let a = agent.act(0, 0, &mut rng).unwrap();
            let mean = if a == 1 { 1.0 } else { 0.0 };
            let r = mean + rng.sample::<f64, _>(StandardNormal) * 0.5;
            agent.observe(&tr(0, a, r, 0)).unwrap();
            if t >= 1_000 && a == 1 {
                good += 1;
            }
        }
        assert!(good > 950, "{good}");
    }
}
