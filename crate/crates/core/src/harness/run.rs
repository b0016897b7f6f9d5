use std::path::Path;

use rand::SeedableRng;
use rayon::prelude::*;

use super::config::{BuildContext, ExperimentConfig, RunLength};
use super::output::{aggregate, SummaryRow};
use super::{HarnessError, Result};
use crate::agents::{Agent, Transition};
use crate::bounds::{diameter, TheoryParams};
use crate::environments::{finite_horizon_values, optimal_gain, EpisodicMDP, Environment, TabularMDP, DEFAULT_TOL};
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Number of completed steps.
    pub step: u64,
    pub cum_reward: f64,
    pub cum_pseudo_regret: f64,
}

/// Cumulative reward and pseudo-regret of one (agent, seed, conf_scale) run.
///
/// Continuing runs charge `rho* - mean_reward(s_t, a_t)` every step.
/// Episodic runs charge `V*_1(s_0) - sum_h mean_reward(s_h, a_h)` when an
/// episode ends, so points inside an episode only count finished episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub agent: String,
    pub seed: u64,
    pub conf_scale: f64,
    pub points: Vec<TracePoint>,
}

impl RegretTrace {
    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub traces: Vec<RegretTrace>,
    pub summary: Vec<SummaryRow>,
}

/// Per-member regret baselines.
enum Oracle {
    /// `rho*` of every member.
    Gain(Vec<f64>),
    /// `V*_1(s)` of every member.
    Value(Vec<Vec<f64>>),
}

fn oracle(env: &Environment, run: RunLength) -> Result<Oracle> {
    let members = env.members();
    match run {
        RunLength::Continuing { .. } => Ok(Oracle::Gain(
            members.iter().map(|(_, m)| optimal_gain(m, DEFAULT_TOL).map(|g| g.gain)).collect::<Result<_, _>>()?,
        )),
        RunLength::Episodic { episodes, horizon } => {
            let values = members
                .iter()
                .map(|(_, m)| {
                    let episodic = EpisodicMDP::stationary((*m).clone(), horizon, episodes)?;
                    Ok(finite_horizon_values(&episodic).values.swap_remove(0))
                })
                .collect::<Result<_, HarnessError>>()?;
            Ok(Oracle::Value(values))
        }
    }
}

fn member_at(env: &Environment, t: u64) -> usize {
    match env {
        Environment::Stationary(_) => 0,
        Environment::Changing(c) => c.segment_at(t),
    }
}

struct Job<'a> {
    agent: Box<dyn Agent>,
    label: &'a str,
    seed: u64,
    conf_scale: f64,
}

struct Recorder {
    stride: u64,
    total: u64,
    points: Vec<TracePoint>,
}

impl Recorder {
    fn new(stride: u64, total: u64) -> Self {
        Recorder { stride, total, points: Vec::with_capacity((total / stride + 1).min(1 << 20) as usize) }
    }

    fn record(&mut self, step: u64, cum_reward: f64, cum_pseudo_regret: f64) {
        if step.is_multiple_of(self.stride) || step == self.total {
            self.points.push(TracePoint { step, cum_reward, cum_pseudo_regret });
        }
    }
}

fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Environment randomness of one job. Every (s, a) pair owns a transition
/// stream and a reward stream, so the k-th visit to a pair sees the same
/// draws whichever agent runs. This couples runs of different agents on a
/// seed without changing the law of any single run.
struct EnvStreams {
    initial: SimRng,
    pairs: Vec<(SimRng, SimRng)>,
}

impl EnvStreams {
    fn new(seed: u64, pairs: usize) -> Self {
        let pairs = (0..pairs as u64).map(|i| (stream(seed, 2 + 2 * i), stream(seed, 3 + 2 * i))).collect();
        EnvStreams { initial: stream(seed, 0), pairs }
    }

    fn step(&mut self, model: &TabularMDP, s: usize, a: usize) -> Result<(usize, f64)> {
        model.check_indices(s, a)?;
        let (transition_rng, reward_rng) = &mut self.pairs[s * model.n_actions() + a];
        Ok((model.sample_next(s, a, transition_rng)?, model.sample_reward(s, a, reward_rng)?))
    }
}

fn run_job(env: &Environment, run: RunLength, oracle: &Oracle, stride: u64, mut job: Job) -> Result<RegretTrace> {
    let mut streams = EnvStreams::new(job.seed, env.n_states() * env.n_actions());
    let mut agent_rng = stream(job.seed, 1);
    let total = run.total_steps();
    let mut rec = Recorder::new(stride, total);
    let (mut cum_reward, mut cum_regret) = (0.0, 0.0);
    let mut t = 0u64;
    match (run, oracle) {
        (RunLength::Continuing { steps }, Oracle::Gain(gains)) => {
            let mut s = env.base().initial_state(&mut streams.initial);
            while t < steps {
                let member = member_at(env, t);
                let model = env.model_at(t);
                let a = job.agent.act(s, 0, &mut agent_rng)?;
                let (next, r) = streams.step(model, s, a)?;
                cum_reward += r;
                cum_regret += gains[member] - model.mean_reward(s, a);
                job.agent.observe(&Transition { state: s, action: a, reward: r, next_state: next, step: 0 })?;
                s = next;
                t += 1;
                rec.record(t, cum_reward, cum_regret);
            }
        }
        (RunLength::Episodic { episodes, horizon }, Oracle::Value(values)) => {
            for _ in 0..episodes {
                let member = member_at(env, t);
                let mut s = env.model_at(t).initial_state(&mut streams.initial);
                let optimum = values[member][s];
                let mut collected = 0.0;
                for h in 0..horizon {
                    let model = env.model_at(t);
                    let a = job.agent.act(s, h, &mut agent_rng)?;
                    let (next, r) = streams.step(model, s, a)?;
                    cum_reward += r;
                    collected += model.mean_reward(s, a);
                    if h + 1 == horizon {
                        cum_regret += optimum - collected;
                    }
                    job.agent.observe(&Transition { state: s, action: a, reward: r, next_state: next, step: h })?;
                    s = next;
                    t += 1;
                    rec.record(t, cum_reward, cum_regret);
                }
                job.agent.end_episode();
            }
        }
        _ => unreachable!("oracle kind follows the run length"),
    }
    Ok(RegretTrace { agent: job.label.to_string(), seed: job.seed, conf_scale: job.conf_scale, points: rec.points })
}

/// Runs every (agent, conf_scale, seed) job, in that nesting order, on
/// `threads` workers (all cores when `None`). Output does not depend on
/// `threads`.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path, threads: Option<usize>) -> Result<ExperimentResult> {
    let env = cfg.env.build(base_dir)?;
    let run = cfg.validate(&env)?;
    let oracle = oracle(&env, run)?;
    let ctx = BuildContext { env: &env, run };
    let labels: Vec<String> = cfg.agents.iter().map(|a| a.label()).collect();
    let mut specs = Vec::new();
    for (i, agent) in cfg.agents.iter().enumerate() {
        for &c in agent.conf_scales(&cfg.conf_scales) {
            for &seed in &cfg.seeds {
                specs.push((i, c, seed));
            }
        }
    }
    let execute = || {
        specs
            .par_iter()
            .map(|&(i, conf_scale, seed)| {
                let agent = cfg.agents[i].build(&ctx, conf_scale)?;
                let job = Job { agent, label: &labels[i], seed, conf_scale };
                run_job(&env, run, &oracle, cfg.record_stride, job)
            })
            .collect::<Result<Vec<_>>>()
    };
    let traces = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
            .install(execute)?,
        None => execute()?,
    };
    let summary = aggregate(&traces);
    Ok(ExperimentResult { traces, summary })
}

/// Bound inputs derived from an experiment: sizes, run length, the first
/// agent's `eps` and `delta`, moment bounds, reward range and diameter of the
/// first member. Fields set in the config's `theory` table take precedence.
pub fn theory_params(cfg: &ExperimentConfig, base_dir: &Path) -> Result<TheoryParams> {
    let env = cfg.env.build(base_dir)?;
    let run = cfg.run_length()?;
    let ctx = BuildContext { env: &env, run };
    let (eps, delta) = cfg
        .agents
        .iter()
        .map(|a| a.eps_delta())
        .fold((None, None), |(e, d), (e2, d2)| (e.or(e2), d.or(d2)));
    let (eps, delta) = (eps.unwrap_or(0.05), delta.unwrap_or(0.1));
    let (r_min, r_max) = env
        .members()
        .iter()
        .map(|(_, m)| m.mean_reward_range())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
    let d = diameter(env.base(), 1e-9, 1_000_000);
    let derived = TheoryParams {
        diameter: d.is_finite().then_some(d),
        states: Some(env.n_states() as f64),
        actions: Some(env.n_actions() as f64),
        steps: Some(run.total_steps() as f64),
        horizon: match run {
            RunLength::Episodic { horizon, .. } => Some(horizon as f64),
            RunLength::Continuing { .. } => None,
        },
        delta: Some(delta),
        eps: Some(eps),
        v: ctx.centered_moment(eps).ok(),
        u: ctx.raw_moment(eps).ok(),
        r_max: Some(r_max),
        r_min: Some(r_min),
        change_budget: Some(env.members().len() as f64),
        lambda: None,
        gap: None,
        policy_return_time: None,
        estimator: cfg.agents.iter().find_map(|a| match a {
            super::AgentSpec::HeavyUcrl2(s) => Some(s.estimator),
            _ => None,
        }),
    };
    let o = cfg.theory.clone().unwrap_or_default();
    Ok(TheoryParams {
        diameter: o.diameter.or(derived.diameter),
        states: o.states.or(derived.states),
        actions: o.actions.or(derived.actions),
        steps: o.steps.or(derived.steps),
        horizon: o.horizon.or(derived.horizon),
        delta: o.delta.or(derived.delta),
        eps: o.eps.or(derived.eps),
        v: o.v.or(derived.v),
        u: o.u.or(derived.u),
        r_max: o.r_max.or(derived.r_max),
        r_min: o.r_min.or(derived.r_min),
        change_budget: o.change_budget.or(derived.change_budget),
        lambda: o.lambda,
        gap: o.gap,
        policy_return_time: o.policy_return_time,
        estimator: o.estimator.or(derived.estimator),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn single_state_single_action_has_zero_regret() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("one.mdp"), "1 1\n1\ngaussian 0.3 1\n").unwrap();
        for length in ["steps = 57", "episodes = 7\nhorizon = 3"] {
            let cfg = config(&format!(
                "seeds = [4]\n{length}\nrecord_stride = 5\n[env]\nkind = \"file\"\npath = \"one.mdp\"\n[[agents]]\nalgo = \"psrl\"\n[[agents]]\nalgo = \"heavy_ucrl2\"\neps = 1.0\n"
            ));
            let result = run_experiment(&cfg, dir.path(), Some(1)).unwrap();
            for trace in &result.traces {
                assert!(trace.points.iter().all(|p| p.cum_pseudo_regret == 0.0), "{length}: {trace:?}");
            }
        }
    }

    #[test]
    fn final_step_always_recorded() {
        let cfg = config(
            "seeds = [0]\nsteps = 23\nrecord_stride = 10\n[env]\nkind = \"lower_bound\"\ndelta_p = 0.2\nlambda_gap = 0.1\n[[agents]]\nalgo = \"psrl\"\n",
        );
        let result = run_experiment(&cfg, Path::new("."), Some(1)).unwrap();
        let steps: Vec<u64> = result.traces[0].points.iter().map(|p| p.step).collect();
        assert_eq!(steps, vec![10, 20, 23]);
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let cfg = config(
            "seeds = [3, 3]\nepisodes = 50\nhorizon = 5\nrecord_stride = 1\n[env]\nkind = \"double_chain\"\n[[agents]]\nalgo = \"heavy_q\"\n[[agents]]\nalgo = \"psrl\"\n",
        );
        let result = run_experiment(&cfg, Path::new("."), Some(2)).unwrap();
        for pair in result.traces.chunks(2) {
            assert_eq!(pair[0], pair[1]);
        }
    }

    #[test]
    fn optimal_policy_regret_is_small() {
        // An agent that always plays the optimal stationary policy.
        struct Fixed(Vec<usize>);
        impl Agent for Fixed {
            fn act(&mut self, s: usize, _: usize, _: &mut SimRng) -> Result<usize, crate::agents::AgentError> {
                Ok(self.0[s])
            }
            fn observe(&mut self, _: &Transition) -> Result<(), crate::agents::AgentError> {
                Ok(())
            }
        }
        let env = Environment::Stationary(crate::environments::lower_bound_mdp(0.2, 0.1, 2).unwrap());
        let run = RunLength::Continuing { steps: 200_000 };
        let oracle = oracle(&env, run).unwrap();
        let policy = optimal_gain(env.base(), DEFAULT_TOL).unwrap().policy;
        let job = Job { agent: Box::new(Fixed(policy)), label: "opt", seed: 1, conf_scale: 1.0 };
        let trace = run_job(&env, run, &oracle, 1000, job).unwrap();
        let last = trace.last().unwrap();
        assert!((last.cum_pseudo_regret / 200_000.0).abs() < 1e-2, "{last:?}");
    }
}
