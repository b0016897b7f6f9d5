use serde::{Deserialize, Serialize};

use super::{EnvError, InitialState, TabularMDP};
use crate::distributions::RewardDist;

/// DoubleChain action moving along a chain (forward with probability `p`).
pub const SOLID: usize = 0;
/// DoubleChain action moving back deterministically.
pub const DASHED: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleChainParams {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default = "default_upper")]
    pub upper: RewardDist,
    #[serde(default = "default_lower")]
    pub lower: RewardDist,
}

fn default_p() -> f64 {
    0.8
}
fn default_l() -> usize {
    3
}
fn default_upper() -> RewardDist {
    RewardDist::Gaussian { mean: 0.5, stddev: 0.1 }
}
fn default_lower() -> RewardDist {
    RewardDist::SymmetricStable { mean: 1.0, alpha: 1.1, scale: 1.0 }
}

impl Default for DoubleChainParams {
    fn default() -> Self {
        DoubleChainParams { p: default_p(), l: default_l(), upper: default_upper(), lower: default_lower() }
    }
}

/// Two RiverSwim-style chains of length `l` hanging off a start state.
///
/// States: `0` is the start, `1..=l` the upper chain ending in the
/// `upper`-rewarded state `l`, `l+1..=2l+1` the lower chain (one state
/// longer) ending in the `lower`-rewarded state `2l+1`. From the start, [`DASHED`] enters the upper
/// chain and [`SOLID`] the lower one. Inside a chain, `SOLID` moves forward
/// with probability `p` (the chain end loops on itself instead) and back with
/// `1 - p` (the first chain state stays put), while `DASHED` moves back
/// deterministically, leaving the chain from its first state. Rewards depend
/// on the state only: upper intermediates are `N(0, 0.1^2)`, lower
/// intermediates `N(-0.1, 0.01^2)`, the start pays 0.
pub fn double_chain(params: &DoubleChainParams) -> Result<TabularMDP, EnvError> {
    let DoubleChainParams { p, l, upper, lower } = *params;
    if !(p > 0.0 && p < 1.0) {
        return Err(EnvError::InvalidParameter(format!("chain probability p = {p} must lie in (0, 1)")));
    }
    if l == 0 {
        return Err(EnvError::InvalidParameter("chain length l must be at least 1".into()));
    }
    let n = 2 * l + 2;
    let n_actions = 2;
    let mut trans = vec![0.0; n * n_actions * n];
    let mut set = |s: usize, a: usize, next: usize, prob: f64| trans[(s * n_actions + a) * n + next] += prob;

    set(0, DASHED, 1, 1.0);
    set(0, SOLID, l + 1, 1.0);
    for (base, len) in [(1, l), (l + 1, l + 1)] {
        for j in 0..len {
            let s = base + j;
            let back = if j == 0 { 0 } else { s - 1 };
            set(s, DASHED, back, 1.0);
            let forward = if j + 1 == len { s } else { s + 1 };
            let solid_back = if j == 0 { s } else { s - 1 };
            set(s, SOLID, forward, p);
            set(s, SOLID, solid_back, 1.0 - p);
        }
    }

    let upper_mid = RewardDist::gaussian(0.0, 0.1)?;
    let lower_mid = RewardDist::gaussian(-0.1, 0.01)?;
    let state_reward = |s: usize| -> RewardDist {
        match s {
            0 => RewardDist::Constant { value: 0.0 },
            s if s == l => upper,
            s if s < l => upper_mid,
            s if s == 2 * l + 1 => lower,
            _ => lower_mid,
        }
    };
    let rewards = (0..n * n_actions).map(|i| state_reward(i / n_actions)).collect();
    TabularMDP::new(n, n_actions, trans, rewards, InitialState::Fixed(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SixArmsParams {
    /// Probability that action `i` in the hub reaches arm `i + 1`.
    #[serde(default = "default_arm_probs")]
    pub probs: [f64; 6],
    /// When set, non-rewarding actions inside an arm stay in the arm
    /// instead of returning to the hub.
    #[serde(default)]
    pub other_actions_self_loop: bool,
}

fn default_arm_probs() -> [f64; 6] {
    [1.0, 0.15, 0.1, 0.05, 0.03, 0.01]
}

impl Default for SixArmsParams {
    fn default() -> Self {
        SixArmsParams { probs: default_arm_probs(), other_actions_self_loop: false }
    }
}

/// Hub state `0` surrounded by six arms `1..=6`.
///
/// Action `i` in the hub reaches arm `i + 1` with probability `probs[i]`
/// and otherwise stays in the hub. In arm `i`, action `i - 1` loops with
/// reward `r_i`; every other action returns to the hub with reward 0.
/// `r_1 = N(1.2, 0.1^2)` and `r_i` is symmetric stable with
/// `alpha = 1.1`, unit scale and mean `1 + 0.2 (i - 1)` for `i >= 2`.
pub fn six_arms(params: &SixArmsParams) -> Result<TabularMDP, EnvError> {
    if params.probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(EnvError::InvalidParameter(format!("arm probabilities {:?} must lie in (0, 1]", params.probs)));
    }
    let n = 7;
    let n_actions = 6;
    let mut trans = vec![0.0; n * n_actions * n];
    let zero = RewardDist::Constant { value: 0.0 };
    let mut rewards = vec![zero; n * n_actions];
    for (a, &p) in params.probs.iter().enumerate() {
        trans[a * n + a + 1] += p;
        trans[a * n] += 1.0 - p;
    }
    for arm in 1..=6 {
        for a in 0..n_actions {
            let row = (arm * n_actions + a) * n;
            if a == arm - 1 {
                trans[row + arm] = 1.0;
                rewards[arm * n_actions + a] = if arm == 1 {
                    RewardDist::gaussian(1.2, 0.1)?
                } else {
                    RewardDist::stable(1.0 + 0.2 * (arm as f64 - 1.0), 1.1, 1.0)?
                };
            } else if params.other_actions_self_loop {
                trans[row + arm] = 1.0;
            } else {
                trans[row] = 1.0;
            }
        }
    }
    TabularMDP::new(n, n_actions, trans, rewards, InitialState::Fixed(0))
}

/// Two-state MDP used for the lower bound.
///
/// Every action crosses between the states with probability `delta_p`,
/// except action 0 in state 0, which reaches state 1 with
/// `delta_p + lambda_gap`. State 1 pays 1 per step, state 0 pays 0.
pub fn lower_bound_mdp(delta_p: f64, lambda_gap: f64, n_actions: usize) -> Result<TabularMDP, EnvError> {
    if !(delta_p > 0.0 && lambda_gap >= 0.0 && delta_p + lambda_gap <= 1.0) {
        return Err(EnvError::InvalidParameter(format!(
            "need 0 < delta ({delta_p}) and delta + lambda ({}) <= 1",
            delta_p + lambda_gap
        )));
    }
    if n_actions < 2 {
        return Err(EnvError::InvalidParameter("lower-bound MDP needs at least 2 actions".into()));
    }
    let n = 2;
    let mut trans = vec![0.0; n * n_actions * n];
    for a in 0..n_actions {
        let cross = if a == 0 { delta_p + lambda_gap } else { delta_p };
        trans[a * n] = 1.0 - cross;
        trans[a * n + 1] = cross;
        trans[(n_actions + a) * n] = delta_p;
        trans[(n_actions + a) * n + 1] = 1.0 - delta_p;
    }
    let mut rewards = vec![RewardDist::Constant { value: 0.0 }; n * n_actions];
    for a in 0..n_actions {
        rewards[n_actions + a] = RewardDist::Constant { value: 1.0 };
    }
    TabularMDP::new(n, n_actions, trans, rewards, InitialState::Fixed(0))
}
