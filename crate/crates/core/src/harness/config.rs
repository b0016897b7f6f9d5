use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{HarnessError, Result};
use crate::agents::{
    Agent, BonusKind, HeavyQ, HeavyQParams, HeavyUcrl2, Psrl, PsrlMode, PsrlParams, RestartSchedule, Restarting,
    RewardCi, Ucrl2Params,
};
use crate::bounds::TheoryParams;
use crate::environments::{
    double_chain, lower_bound_mdp, parse_mdp, six_arms, ChangingMDP, DoubleChainParams, Environment, SixArmsParams,
    TabularMDP,
};
use crate::estimators::EstimatorKind;

/// Top-level experiment file.
///
/// Exactly one of `steps` (continuing run) or `episodes` together with
/// `horizon` (episodic run, the environment resets every `horizon` steps)
/// must be given.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub env: EnvSpec,
    pub agents: Vec<AgentSpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub episodes: Option<u64>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub steps: Option<u64>,
    /// Default `conf_scale` grid; agents may override it.
    #[serde(default = "default_conf_scales")]
    pub conf_scales: Vec<f64>,
    /// Record every `record_stride` steps; the final step is always recorded.
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    /// Output directory, used when the command line gives none.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Overrides for `check-bounds`.
    #[serde(default)]
    pub theory: Option<TheoryParams>,
}

fn default_conf_scales() -> Vec<f64> {
    vec![1.0]
}
fn default_stride() -> u64 {
    100
}
fn default_delta() -> f64 {
    0.1
}
fn default_eps() -> f64 {
    0.05
}
fn default_estimator() -> EstimatorKind {
    EstimatorKind::Truncated
}
fn default_heavy_constant() -> f64 {
    8.0
}
fn default_actions() -> usize {
    2
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunLength {
    Episodic { episodes: u64, horizon: usize },
    Continuing { steps: u64 },
}

impl RunLength {
    pub fn total_steps(self) -> u64 {
        match self {
            RunLength::Episodic { episodes, horizon } => episodes.saturating_mul(horizon as u64),
            RunLength::Continuing { steps } => steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    DoubleChain(DoubleChainParams),
    SixArms(SixArmsParams),
    LowerBound(LowerBoundSpec),
    /// Plain-text MDP file; relative paths resolve against the config file.
    File(FileSpec),
    Changing(ChangingSpec),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundSpec {
    pub delta_p: f64,
    pub lambda_gap: f64,
    #[serde(default = "default_actions")]
    pub actions: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    pub path: PathBuf,
}

/// `members[0]` is active from step 0 and `members[i]` from `switch_at[i - 1]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangingSpec {
    pub members: Vec<EnvSpec>,
    pub switch_at: Vec<u64>,
}

impl EnvSpec {
    fn build_model(&self, base_dir: &Path) -> Result<TabularMDP> {
        let env_err = |e: crate::environments::EnvError| HarnessError::Config(format!("env: {e}"));
        match self {
            EnvSpec::DoubleChain(p) => double_chain(p).map_err(env_err),
            EnvSpec::SixArms(p) => six_arms(p).map_err(env_err),
            EnvSpec::LowerBound(p) => lower_bound_mdp(p.delta_p, p.lambda_gap, p.actions).map_err(env_err),
            EnvSpec::File(f) => {
                let path = base_dir.join(&f.path);
                let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
                parse_mdp(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
            }
            EnvSpec::Changing(_) => Err(HarnessError::Config("changing environments cannot be nested".into())),
        }
    }

    pub fn build(&self, base_dir: &Path) -> Result<Environment> {
        match self {
            EnvSpec::Changing(c) => {
                if c.members.len() != c.switch_at.len() + 1 {
                    return Err(HarnessError::Config(format!(
                        "{} members need {} switch steps, got {}",
                        c.members.len(),
                        c.members.len().saturating_sub(1),
                        c.switch_at.len()
                    )));
                }
                let starts = std::iter::once(0).chain(c.switch_at.iter().copied());
                let segments = starts
                    .zip(&c.members)
                    .map(|(t, m)| Ok((t, m.build_model(base_dir)?)))
                    .collect::<Result<Vec<_>>>()?;
                let changing = ChangingMDP::new(segments).map_err(|e| HarnessError::Config(format!("env: {e}")))?;
                Ok(Environment::Changing(changing))
            }
            other => Ok(Environment::Stationary(other.build_model(base_dir)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum AgentSpec {
    HeavyUcrl2(HeavyUcrl2Spec),
    Ucrl2(Ucrl2Spec),
    HeavyQ(HeavyQSpec),
    Qlearning(QlearningSpec),
    Psrl(PsrlSpec),
    Restart(RestartSpec),
}

/// Missing `u` and `v` default to the largest moment bound over the
/// environment's reward distributions.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyUcrl2Spec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub conf_scales: Option<Vec<f64>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub u: Option<f64>,
    #[serde(default)]
    pub v: Option<f64>,
    #[serde(default)]
    pub max_evi_iterations: Option<usize>,
}

/// Empirical-mean UCRL2; `reward_ci` is `subgaussian` or `valid`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ucrl2Spec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub conf_scales: Option<Vec<f64>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub reward_ci: RewardCi,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub v: Option<f64>,
    #[serde(default = "one")]
    pub reward_range: f64,
    #[serde(default)]
    pub max_evi_iterations: Option<usize>,
}

/// Heavy-Q-Learning; `r_max` defaults to the largest mean reward.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyQSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub conf_scales: Option<Vec<f64>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub u: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub bonus: BonusKind,
    #[serde(default = "default_heavy_constant")]
    pub heavy_constant: f64,
    #[serde(default)]
    pub iota: Option<f64>,
}

/// Optimistic Q-learning without truncation.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QlearningSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub conf_scales: Option<Vec<f64>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub bonus: BonusKind,
    #[serde(default)]
    pub iota: Option<f64>,
}

/// Gaussian PSRL. Follows the run mode unless `continuing` is set.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsrlSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub conf_scales: Option<Vec<f64>>,
    #[serde(default)]
    pub prior_mean: f64,
    #[serde(default = "one")]
    pub prior_variance: f64,
    #[serde(default = "one")]
    pub noise_variance: f64,
    #[serde(default = "one")]
    pub dirichlet_prior: f64,
    #[serde(default)]
    pub continuing: Option<bool>,
}

/// Rebuilds `inner` on the restart schedule for `change_budget`. The
/// schedule's `eps` defaults to the inner agent's.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestartSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub conf_scales: Option<Vec<f64>>,
    pub change_budget: u64,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub inner: Box<AgentSpec>,
}

/// What agent builders need to know about the environment and run.
#[derive(Debug, Clone)]
pub(crate) struct BuildContext<'a> {
    pub env: &'a Environment,
    pub run: RunLength,
}

impl BuildContext<'_> {
    fn dists(&self) -> impl Iterator<Item = &crate::distributions::RewardDist> {
        self.env.members().into_iter().flat_map(|(_, m)| m.reward_dists().iter())
    }

    pub fn raw_moment(&self, eps: f64) -> Result<f64> {
        self.dists().try_fold(0.0f64, |acc, d| Ok(acc.max(d.raw_moment_bound(eps)?)))
    }

    pub fn centered_moment(&self, eps: f64) -> Result<f64> {
        self.dists().try_fold(0.0f64, |acc, d| Ok(acc.max(d.centered_moment_bound(eps)?)))
    }

    pub fn max_mean_reward(&self) -> f64 {
        self.env.members().iter().map(|(_, m)| m.mean_reward_range().1).fold(f64::NEG_INFINITY, f64::max)
    }

    fn episodic(&self, algo: &str) -> Result<(usize, u64)> {
        match self.run {
            RunLength::Episodic { episodes, horizon } => Ok((horizon, episodes)),
            RunLength::Continuing { .. } => {
                Err(HarnessError::Config(format!("{algo} needs an episodic run (episodes and horizon)")))
            }
        }
    }
}

fn moment_err(what: &str, e: HarnessError) -> HarnessError {
    HarnessError::Config(format!("cannot derive default {what}: {e}"))
}

impl AgentSpec {
    pub fn label(&self) -> String {
        let explicit = match self {
            AgentSpec::HeavyUcrl2(s) => &s.name,
            AgentSpec::Ucrl2(s) => &s.name,
            AgentSpec::HeavyQ(s) => &s.name,
            AgentSpec::Qlearning(s) => &s.name,
            AgentSpec::Psrl(s) => &s.name,
            AgentSpec::Restart(s) => &s.name,
        };
        if let Some(name) = explicit {
            return name.clone();
        }
        match self {
            AgentSpec::HeavyUcrl2(_) => "heavy_ucrl2".into(),
            AgentSpec::Ucrl2(s) => match s.reward_ci {
                RewardCi::Subgaussian => "ucrl2_subgaussian".into(),
                RewardCi::Valid => "ucrl2_valid".into(),
                RewardCi::Robust => "ucrl2_robust".into(),
            },
            AgentSpec::HeavyQ(_) => "heavy_q".into(),
            AgentSpec::Qlearning(_) => "qlearning".into(),
            AgentSpec::Psrl(_) => "psrl".into(),
            AgentSpec::Restart(s) => format!("restart_{}", s.inner.label()),
        }
    }

    pub fn conf_scales<'a>(&'a self, default: &'a [f64]) -> &'a [f64] {
        let own = match self {
            AgentSpec::HeavyUcrl2(s) => &s.conf_scales,
            AgentSpec::Ucrl2(s) => &s.conf_scales,
            AgentSpec::HeavyQ(s) => &s.conf_scales,
            AgentSpec::Qlearning(s) => &s.conf_scales,
            AgentSpec::Psrl(s) => &s.conf_scales,
            AgentSpec::Restart(s) => &s.conf_scales,
        };
        own.as_deref().unwrap_or(default)
    }

    /// `eps` and `delta` the agent runs with, if it has them.
    pub fn eps_delta(&self) -> (Option<f64>, Option<f64>) {
        match self {
            AgentSpec::HeavyUcrl2(s) => (Some(s.eps), Some(s.delta)),
            AgentSpec::Ucrl2(s) => (Some(s.eps), Some(s.delta)),
            AgentSpec::HeavyQ(s) => (Some(s.eps), Some(s.delta)),
            AgentSpec::Qlearning(s) => (None, Some(s.delta)),
            AgentSpec::Psrl(_) => (None, None),
            AgentSpec::Restart(s) => (s.eps.or(s.inner.eps_delta().0), Some(s.delta)),
        }
    }

    pub(crate) fn build(&self, ctx: &BuildContext, conf_scale: f64) -> Result<Box<dyn Agent>> {
        self.build_with_delta(ctx, conf_scale, None)
    }

    fn build_with_delta(&self, ctx: &BuildContext, conf_scale: f64, delta: Option<f64>) -> Result<Box<dyn Agent>> {
        let (n_states, n_actions) = (ctx.env.n_states(), ctx.env.n_actions());
        let agent_err = |e: crate::agents::AgentError| HarnessError::Config(format!("agent `{}`: {e}", self.label()));
        let agent: Box<dyn Agent> = match self {
            AgentSpec::HeavyUcrl2(s) => {
                let u = match s.u {
                    Some(u) => u,
                    None => ctx.raw_moment(s.eps).map_err(|e| moment_err("u", e))?,
                };
                let v = match s.v {
                    Some(v) => v,
                    None => ctx.centered_moment(s.eps).map_err(|e| moment_err("v", e))?,
                };
                let mut p = Ucrl2Params::heavy(n_states, n_actions, delta.unwrap_or(s.delta), s.eps, u, v)
                    .with_conf_scale(conf_scale);
                p.estimator = s.estimator;
                if let Some(m) = s.max_evi_iterations {
                    p.max_evi_iterations = m;
                }
                Box::new(HeavyUcrl2::new(p).map_err(agent_err)?)
            }
            AgentSpec::Ucrl2(s) => {
                if s.reward_ci == RewardCi::Robust {
                    return Err(HarnessError::Config("use algo = \"heavy_ucrl2\" for the robust interval".into()));
                }
                let v = match (s.v, s.reward_ci) {
                    (Some(v), _) => v,
                    (None, RewardCi::Valid) => ctx.centered_moment(s.eps).map_err(|e| moment_err("v", e))?,
                    (None, _) => 1.0,
                };
                let mut p = Ucrl2Params::vanilla(n_states, n_actions, delta.unwrap_or(s.delta), s.reward_ci, s.eps, v)
                    .with_conf_scale(conf_scale);
                p.reward_range = s.reward_range;
                if let Some(m) = s.max_evi_iterations {
                    p.max_evi_iterations = m;
                }
                Box::new(HeavyUcrl2::new(p).map_err(agent_err)?)
            }
            AgentSpec::HeavyQ(s) => {
                let (horizon, episodes) = ctx.episodic("heavy_q")?;
                let u = match s.u {
                    Some(u) => u,
                    None => ctx.raw_moment(s.eps).map_err(|e| moment_err("u", e))?,
                };
                let r_max = s.r_max.unwrap_or_else(|| ctx.max_mean_reward());
                let mut p = HeavyQParams::heavy(
                    n_states,
                    n_actions,
                    horizon,
                    episodes,
                    delta.unwrap_or(s.delta),
                    s.eps,
                    u,
                    r_max,
                )
                .with_conf_scale(conf_scale);
                p.bonus = s.bonus;
                p.heavy_constant = s.heavy_constant;
                p.iota = s.iota;
                Box::new(HeavyQ::new(p).map_err(agent_err)?)
            }
            AgentSpec::Qlearning(s) => {
                let (horizon, episodes) = ctx.episodic("qlearning")?;
                let r_max = s.r_max.unwrap_or_else(|| ctx.max_mean_reward());
                let mut p =
                    HeavyQParams::vanilla(n_states, n_actions, horizon, episodes, delta.unwrap_or(s.delta), r_max)
                        .with_conf_scale(conf_scale);
                p.bonus = s.bonus;
                p.iota = s.iota;
                Box::new(HeavyQ::new(p).map_err(agent_err)?)
            }
            AgentSpec::Psrl(s) => {
                let mode = match (s.continuing, ctx.run) {
                    (Some(true), _) | (None, RunLength::Continuing { .. }) => PsrlMode::Continuing,
                    (_, RunLength::Episodic { horizon, .. }) => PsrlMode::Episodic { horizon },
                    (Some(false), RunLength::Continuing { .. }) => {
                        return Err(HarnessError::Config("episodic PSRL needs an episodic run".into()))
                    }
                };
                let mut p = PsrlParams::new(n_states, n_actions, mode).with_conf_scale(conf_scale);
                p.prior_mean = s.prior_mean;
                p.prior_variance = s.prior_variance;
                p.noise_variance = s.noise_variance;
                p.dirichlet_prior = s.dirichlet_prior;
                Box::new(Psrl::new(p).map_err(agent_err)?)
            }
            AgentSpec::Restart(s) => {
                if matches!(*s.inner, AgentSpec::Restart(_)) {
                    return Err(HarnessError::Config("restart agents cannot be nested".into()));
                }
                let eps = s
                    .eps
                    .or(s.inner.eps_delta().0)
                    .ok_or_else(|| HarnessError::Config("restart needs `eps` for its schedule".into()))?;
                let schedule = RestartSchedule::new(s.change_budget, eps).map_err(agent_err)?;
                // Build once up front so configuration errors surface here rather than mid-run.
                let inner_delta = schedule.inner_delta(delta.unwrap_or(s.delta));
                s.inner.build_with_delta(ctx, conf_scale, Some(inner_delta))?;
                let inner = (*s.inner).clone();
                let (env, run) = (ctx.env.clone(), ctx.run);
                let restarting = Restarting::new(schedule, delta.unwrap_or(s.delta), move |d| {
                    let ctx = BuildContext { env: &env, run };
                    inner.build_with_delta(&ctx, conf_scale, Some(d)).map_err(|e| {
                        crate::agents::AgentError::InvalidParameter(e.to_string())
                    })
                })
                .map_err(agent_err)?;
                Box::new(restarting)
            }
        };
        Ok(agent)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; returns it with the directory relative paths resolve against.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let config = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn run_length(&self) -> Result<RunLength> {
        match (self.episodes, self.horizon, self.steps) {
            (Some(episodes), Some(horizon), None) if episodes > 0 && horizon > 0 => {
                Ok(RunLength::Episodic { episodes, horizon })
            }
            (None, None, Some(steps)) if steps > 0 => Ok(RunLength::Continuing { steps }),
            _ => Err(HarnessError::Config(
                "give either positive `episodes` and `horizon`, or positive `steps`".into(),
            )),
        }
    }

    /// Checks everything that can be checked without running: run length,
    /// seeds, labels, `conf_scale` grids, and that every agent builds.
    pub fn validate(&self, env: &Environment) -> Result<RunLength> {
        let run = self.run_length()?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("need at least one seed".into()));
        }
        if self.agents.is_empty() {
            return Err(HarnessError::Config("need at least one agent".into()));
        }
        if self.record_stride == 0 {
            return Err(HarnessError::Config("record_stride must be positive".into()));
        }
        let mut labels = Vec::new();
        let ctx = BuildContext { env, run };
        for agent in &self.agents {
            let label = agent.label();
            if label.is_empty() || label.contains([',', '"', '\n', '\r']) {
                return Err(HarnessError::Config(format!("agent name {label:?} must be non-empty without commas or quotes")));
            }
            if labels.contains(&label) {
                return Err(HarnessError::Config(format!("duplicate agent name `{label}`")));
            }
            let scales = agent.conf_scales(&self.conf_scales);
            if scales.is_empty() {
                return Err(HarnessError::Config(format!("agent `{label}` has an empty conf_scale grid")));
            }
            for &c in scales {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(HarnessError::Config(format!("conf_scale {c} must be positive")));
                }
                agent.build(&ctx, c)?;
            }
            labels.push(label);
        }
        Ok(run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seeds = [1, 2]
        episodes = 10
        horizon = 5
        [env]
        kind = "double_chain"
        [[agents]]
        algo = "heavy_ucrl2"
        [[agents]]
        algo = "qlearning"
        conf_scales = [0.1]
    "#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.env, EnvSpec::DoubleChain(DoubleChainParams::default()));
        assert_eq!(cfg.record_stride, 100);
        assert_eq!(cfg.agents[0].conf_scales(&cfg.conf_scales), &[1.0]);
        assert_eq!(cfg.agents[1].conf_scales(&cfg.conf_scales), &[0.1]);
        let env = cfg.env.build(Path::new(".")).unwrap();
        assert_eq!(cfg.validate(&env).unwrap(), RunLength::Episodic { episodes: 10, horizon: 5 });
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = MINIMAL.replace("horizon = 5", "horizon = 5\nhorizn = 3");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(HarnessError::Parse(_))));
        let bad = MINIMAL.replace("kind = \"double_chain\"", "kind = \"double_chain\"\nq = 0.3");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let bad = MINIMAL.replace("algo = \"heavy_ucrl2\"", "algo = \"heavy_ucrl2\"\nepsilon = 0.1");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn run_length_must_be_unambiguous() {
        let cfg = ExperimentConfig::from_toml(&MINIMAL.replace("episodes = 10", "steps = 10")).unwrap();
        assert!(cfg.run_length().unwrap_err().is_config_error());
    }

    #[test]
    fn q_learning_needs_episodes() {
        let text = MINIMAL.replace("episodes = 10\n        horizon = 5", "steps = 100");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let env = cfg.env.build(Path::new(".")).unwrap();
        assert!(cfg.validate(&env).unwrap_err().is_config_error());
    }

    #[test]
    fn moment_defaults_fail_when_eps_too_large() {
        let text = MINIMAL.replace("algo = \"heavy_ucrl2\"", "algo = \"heavy_ucrl2\"\neps = 0.5");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let env = cfg.env.build(Path::new(".")).unwrap();
        assert!(cfg.validate(&env).unwrap_err().is_config_error());
    }

    #[test]
    fn duplicate_labels_rejected() {
        let text = MINIMAL.replace("algo = \"qlearning\"", "algo = \"qlearning\"\nname = \"heavy_ucrl2\"");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let env = cfg.env.build(Path::new(".")).unwrap();
        assert!(cfg.validate(&env).is_err());
    }

    #[test]
    fn changing_env_and_restart_agent() {
        let text = r#"
            seeds = [0]
            steps = 50
            [env]
            kind = "changing"
            switch_at = [25]
            members = [{ kind = "lower_bound", delta_p = 0.2, lambda_gap = 0.1 },
                       { kind = "lower_bound", delta_p = 0.3, lambda_gap = 0.0 }]
            [[agents]]
            algo = "restart"
            change_budget = 2
            inner = { algo = "heavy_ucrl2", eps = 1.0 }
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let env = cfg.env.build(Path::new(".")).unwrap();
        assert_eq!(env.members().len(), 2);
        cfg.validate(&env).unwrap();
        assert_eq!(cfg.agents[0].label(), "restart_heavy_ucrl2");
        assert_eq!(cfg.agents[0].eps_delta(), (Some(1.0), Some(0.1)));
    }
}
