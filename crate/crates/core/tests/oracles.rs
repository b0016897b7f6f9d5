//! Planners against brute-force policy enumeration, plus invariants of the
//! L1-ball maximisation and extended value iteration.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use heavy_rl::agents::{extended_value_iteration, inner_max};
use heavy_rl::distributions::RewardDist;
use heavy_rl::environments::{
    double_chain, finite_horizon_values, lower_bound_mdp, optimal_gain, DoubleChainParams, EpisodicMDP, InitialState,
    TabularMDP,
};
use heavy_rl::SimRng;

/// Long-run average reward of a stationary deterministic policy started in
/// `start`, by iterating the state distribution of the lazy chain.
fn gain_from(mdp: &TabularMDP, policy: &[usize], start: usize) -> f64 {
    let n = mdp.n_states();
    let mut d = vec![0.0; n];
    d[start] = 1.0;
    for _ in 0..1_000_000 {
        let mut next: Vec<f64> = d.iter().map(|x| 0.5 * x).collect();
        for s in 0..n {
            for (t, p) in mdp.row(s, policy[s]).iter().enumerate() {
                next[t] += 0.5 * d[s] * p;
            }
        }
        let change: f64 = next.iter().zip(&d).map(|(a, b)| (a - b).abs()).sum();
        d = next;
        if change < 1e-15 {
            break;
        }
    }
    (0..n).map(|s| d[s] * mdp.mean_reward(s, policy[s])).sum()
}

fn all_policies(n_states: usize, n_actions: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n_actions.pow(n_states as u32);
    (0..total).map(move |mut code| {
        (0..n_states)
            .map(|_| {
                let a = code % n_actions;
                code /= n_actions;
                a
            })
            .collect()
    })
}

fn brute_force_gain(mdp: &TabularMDP) -> f64 {
    all_policies(mdp.n_states(), mdp.n_actions()).map(|pi| gain_from(mdp, &pi, 0)).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn double_chain_gain_matches_enumeration() {
    for p in [0.8, 0.6] {
        let mdp = double_chain(&DoubleChainParams { p, ..DoubleChainParams::default() }).unwrap();
        let oracle = optimal_gain(&mdp, 1e-12).unwrap();
        let brute = brute_force_gain(&mdp);
        assert!((oracle.gain - brute).abs() < 1e-6, "p {p}: {} vs {brute}", oracle.gain);
        let greedy = gain_from(&mdp, &oracle.policy, 0);
        assert!((greedy - brute).abs() < 1e-6);
    }
}

#[test]
fn lower_bound_gain_matches_enumeration() {
    let mdp = lower_bound_mdp(0.1, 0.05, 3).unwrap();
    let oracle = optimal_gain(&mdp, 1e-12).unwrap().gain;
    assert!((oracle - brute_force_gain(&mdp)).abs() < 1e-6);
}

fn random_kernel(rng: &mut SimRng, s: usize, a: usize) -> TabularMDP {
    let mut transitions = Vec::new();
    for _ in 0..s * a {
        let raw: Vec<f64> = (0..s).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
        row[s - 1] = 1.0 - row[..s - 1].iter().sum::<f64>();
        transitions.extend(row);
    }
    let rewards = (0..s * a).map(|_| RewardDist::gaussian(rng.random::<f64>(), 0.3).unwrap()).collect();
    TabularMDP::new(s, a, transitions, rewards, InitialState::Distribution(vec![0.5, 0.3, 0.2])).unwrap()
}

// Expected return of a two-step policy (first-step rule, second-step rule).
fn two_step_return(mdp: &EpisodicMDP, first: &[usize], second: &[usize], init: &[f64]) -> f64 {
    let (k0, k1) = (mdp.kernel(0), mdp.kernel(1));
    let mut total = 0.0;
    for (s, w) in init.iter().enumerate() {
        let a = first[s];
        let cont: f64 = k0.row(s, a).iter().enumerate().map(|(t, p)| p * k1.mean_reward(t, second[t])).sum();
        total += w * (k0.mean_reward(s, a) + cont);
    }
    total
}

#[test]
fn two_step_values_match_enumeration() {
    let mut rng = SimRng::seed_from_u64(17);
    let init = [0.5, 0.3, 0.2];
    for stationary in [true, false] {
        let k0 = random_kernel(&mut rng, 3, 2);
        let mdp = if stationary {
            EpisodicMDP::stationary(k0, 2, 1).unwrap()
        } else {
            EpisodicMDP::new(vec![k0, random_kernel(&mut rng, 3, 2)], 2, 1).unwrap()
        };
        let fh = finite_horizon_values(&mdp);
        let planned: f64 = init.iter().zip(&fh.values[0]).map(|(w, v)| w * v).sum();
        let mut best = f64::NEG_INFINITY;
        for first in all_policies(3, 2) {
            for second in all_policies(3, 2) {
                best = best.max(two_step_return(&mdp, &first, &second, &init));
            }
        }
        assert!((planned - best).abs() < 1e-12, "{planned} vs {best}");
        assert!((two_step_return(&mdp, &fh.policy[0], &fh.policy[1], &init) - best).abs() < 1e-12);
    }
}

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_map(|raw| {
        let total: f64 = raw.iter().sum::<f64>() + 1e-9;
        raw.iter().map(|x| (x + 1e-9 / raw.len() as f64) / total).collect()
    })
}

fn ball_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, Vec<f64>, f64)> {
    (2usize..6).prop_flat_map(|n| (simplex(n), prop::collection::vec(-5.0f64..5.0, n), 0.0f64..2.5, simplex(n), 0.0f64..1.0))
}

proptest! {
    #[test]
    fn inner_max_is_feasible_and_dominates((p_hat, u, budget, q, w) in ball_case()) {
        let (value, p) = inner_max(&p_hat, budget, &u);
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x >= -1e-12));
        let dist: f64 = p.iter().zip(&p_hat).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(dist <= budget + 1e-9);
        let dot = |x: &[f64]| x.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((value - dot(&p)).abs() < 1e-9);
        // Any mixture of p_hat with another distribution that stays in the ball.
        let far: f64 = q.iter().zip(&p_hat).map(|(a, b)| (a - b).abs()).sum();
        let lambda = if far > 0.0 { (w * budget / far).min(1.0) } else { 0.0 };
        let mixed: Vec<f64> = p_hat.iter().zip(&q).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect();
        prop_assert!(value >= dot(&mixed) - 1e-9);
    }

    #[test]
    fn inner_max_grows_with_budget((p_hat, u, budget, _q, w) in ball_case()) {
        let (small, _) = inner_max(&p_hat, budget * w, &u);
        let (large, _) = inner_max(&p_hat, budget, &u);
        prop_assert!(large >= small - 1e-12);
    }

    #[test]
    fn evi_is_optimistic_and_shift_equivariant(seed in 0u64..10_000, radius in 0.0f64..0.5, bonus in 0.0f64..0.3, shift in -2.0f64..2.0) {
        let mut rng = SimRng::seed_from_u64(seed);
        let (s, a) = (rng.random_range(2..=4), rng.random_range(1..=3));
        let mut p_hat = Vec::new();
        for _ in 0..s * a {
            let raw: Vec<f64> = (0..s).map(|_| 0.05 + rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            p_hat.extend(raw.iter().map(|x| x / total));
        }
        let means: Vec<f64> = (0..s * a).map(|_| rng.random::<f64>()).collect();
        let slack = 1e-8;
        let truth = extended_value_iteration(s, a, &means, &p_hat, &vec![0.0; s * a], slack, 10_000_000).unwrap();
        let optimistic: Vec<f64> = means.iter().map(|r| r + bonus).collect();
        let wide = extended_value_iteration(s, a, &optimistic, &p_hat, &vec![radius; s * a], slack, 10_000_000).unwrap();
        prop_assert!(wide.gain >= truth.gain - 2.0 * slack);
        prop_assert!(wide.gain <= means.iter().copied().fold(0.0, f64::max) + bonus + slack);

        let shifted: Vec<f64> = means.iter().map(|r| r + shift).collect();
        let moved = extended_value_iteration(s, a, &shifted, &p_hat, &vec![0.0; s * a], slack, 10_000_000).unwrap();
        prop_assert!((moved.gain - truth.gain - shift).abs() < 4.0 * slack);
    }
}
