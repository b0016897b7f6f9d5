//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};

use heavy_rl::agents::{extended_value_iteration, inner_max, restart_steps, Agent, HeavyQ, HeavyQParams, Transition};
use heavy_rl::bounds::{c_epsilon, check_sequence_lemma, greedy_sequence, learning_rate_lemma_sides, random_valid_sequence};
use heavy_rl::distributions::RewardDist;
use heavy_rl::environments::{finite_horizon_values, optimal_gain, optimal_gain_with, EpisodicMDP, InitialState, TabularMDP};
use heavy_rl::estimators::{EstimatorKind, EstimatorParams, RobustAccumulator};
use heavy_rl::harness::{best_conf_scales, run_experiment, ExperimentConfig, ExperimentResult, SummaryRow};
use heavy_rl::SimRng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn violation_rate(kind: EstimatorKind, delta: f64, n: u64, trials: u64, seed: u64) -> f64 {
    let dist = RewardDist::stable(0.0, 1.1, 1.0).unwrap();
    let eps = 0.05;
    let (u, v) = (dist.raw_moment_bound(eps).unwrap(), dist.centered_moment_bound(eps).unwrap());
    let mut rng = SimRng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..trials {
        let mut acc = RobustAccumulator::new(EstimatorParams::new(kind, eps, u, v, delta)).unwrap();
        for _ in 0..n {
            acc.add_sample(dist.sample(&mut rng)).unwrap();
        }
        if acc.mean().unwrap().abs() > acc.confidence_radius().unwrap() {
            violations += 1;
        }
    }
    violations as f64 / trials as f64
}

fn robust_concentration() -> Outcome {
    let trials = 1000;
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, kind) in [EstimatorKind::Truncated, EstimatorKind::MedianOfMeans].into_iter().enumerate() {
        for (j, delta) in [0.05, 0.1].into_iter().enumerate() {
            for (i, n) in [100, 1000].into_iter().enumerate() {
                let rate = violation_rate(kind, delta, n, trials, (100 * k + 10 * j + i) as u64);
                let limit = delta + 3.0 * (delta / trials as f64).sqrt();
                pass &= rate <= limit;
                parts.push(format!("{kind:?} d={delta} n={n}: {rate:.3}<={limit:.3}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn empirical_failure() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (j, delta) in [0.05, 0.1].into_iter().enumerate() {
        let rate = violation_rate(EstimatorKind::Empirical, delta, 100, 1000, 1000 + j as u64);
        pass &= rate >= 2.0 * delta;
        parts.push(format!("d={delta}: rate {rate:.3} vs 2d={:.2}", 2.0 * delta));
    }
    outcome(pass, parts.join("; "))
}

// Recomputes both sides of the sequence inequality from scratch.
fn sequence_sides(z: &[f64], eps: f64) -> (f64, f64) {
    let mut total = 0.0f64;
    let mut lhs = 0.0;
    for &x in z {
        lhs += x / total.max(1.0).powf(eps / (1.0 + eps));
        total += x;
    }
    let c = 2.0 / (2f64.powf(1.0 / (1.0 + eps)) - 1.0);
    (lhs, c * total.max(1.0).powf(1.0 / (1.0 + eps)))
}

fn sequence_inequality() -> Outcome {
    let mut rng = SimRng::seed_from_u64(3);
    let mut cases = 0;
    let mut failures = 0;
    let mut disagreements = 0;
    for eps in [0.05, 0.25, 0.5, 1.0] {
        let mut sequences: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                let len = rng.random_range(1..=1000);
                random_valid_sequence(&mut rng, len)
            })
            .collect();
        sequences.push(greedy_sequence(1000));
        for z in &sequences {
            let (lhs, rhs) = sequence_sides(z, eps);
            let ok = lhs <= rhs;
            cases += 1;
            failures += u64::from(!ok);
            disagreements += u64::from(check_sequence_lemma(z, eps).unwrap() != ok);
        }
        assert!((c_epsilon(eps) - 2.0 / (2f64.powf(1.0 / (1.0 + eps)) - 1.0)).abs() < 1e-12);
    }
    outcome(
        failures == 0 && disagreements == 0,
        format!("{cases} sequences, {failures} failures, {disagreements} library disagreements"),
    )
}

fn learning_rate_inequality() -> Outcome {
    let tol = 1e-9;
    let mut cases = 0u64;
    let mut failures = 0u64;
    let mut spot_mismatch = 0u64;
    for horizon in [1.0, 2.0, 5.0, 10.0] {
        for eps in [0.05, 0.5, 1.0] {
            let p = eps / (1.0 + eps);
            let mut sum = 0.0;
            for t in 1..=10_000u64 {
                let rate = (horizon + 1.0) / (horizon + t as f64);
                let base = (t as f64).powf(-p);
                sum = (1.0 - rate) * sum + rate * base;
                cases += 1;
                if !(base <= sum * (1.0 + tol) && sum <= 2.0 * base * (1.0 + tol)) {
                    failures += 1;
                }
                if [1, 2, 10, 100, 1000, 10_000].contains(&t) {
                    let (_, direct, _) = learning_rate_lemma_sides(t, eps, horizon);
                    spot_mismatch += u64::from((direct / sum - 1.0).abs() > 1e-9);
                }
            }
        }
    }
    outcome(
        failures == 0 && spot_mismatch == 0,
        format!("{cases} cases, {failures} failures, {spot_mismatch} direct/recursive mismatches"),
    )
}

fn random_mdp(rng: &mut SimRng) -> TabularMDP {
    let s = rng.random_range(2..=4);
    let a = rng.random_range(1..=3);
    let mut transitions = Vec::with_capacity(s * a * s);
    for _ in 0..s * a {
        let raw: Vec<f64> = (0..s).map(|_| 0.05 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let head: f64 = row[..s - 1].iter().sum();
        row[s - 1] = 1.0 - head;
        transitions.extend(row);
    }
    let rewards = (0..s * a).map(|_| RewardDist::constant(rng.random::<f64>()).unwrap()).collect();
    TabularMDP::new(s, a, transitions, rewards, InitialState::Fixed(0)).unwrap()
}

fn policy_gain(mdp: &TabularMDP, policy: &[usize]) -> f64 {
    let s = mdp.n_states();
    let rewards: Vec<f64> = (0..s).map(|x| mdp.mean_reward(x, policy[x])).collect();
    let transitions: Vec<f64> = (0..s).flat_map(|x| mdp.row(x, policy[x]).to_vec()).collect();
    optimal_gain_with(s, 1, &rewards, &transitions, 1e-12, 10_000_000).unwrap().gain
}

// Best `p . u` over grid points of resolution `1 / steps` inside the L1 ball.
fn grid_max(p_hat: &[f64], budget: f64, u: &[f64], steps: usize) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn walk(i: usize, left: usize, steps: usize, p: &mut Vec<f64>, p_hat: &[f64], budget: f64, u: &[f64], best: &mut f64) {
        if i == p_hat.len() - 1 {
            p.push(left as f64 / steps as f64);
            let dist: f64 = p.iter().zip(p_hat).map(|(a, b)| (a - b).abs()).sum();
            if dist <= budget + 1e-12 {
                let value: f64 = p.iter().zip(u).map(|(a, b)| a * b).sum();
                *best = best.max(value);
            }
            p.pop();
            return;
        }
        for k in 0..=left {
            p.push(k as f64 / steps as f64);
            walk(i + 1, left - k, steps, p, p_hat, budget, u, best);
            p.pop();
        }
    }
    let mut best = f64::NEG_INFINITY;
    walk(0, steps, steps, &mut Vec::new(), p_hat, budget, u, &mut best);
    best
}

fn evi_correctness() -> Outcome {
    let mut rng = SimRng::seed_from_u64(5);
    let slack = 1e-6;
    let mut worst_gain = 0.0f64;
    let mut worst_inner = 0.0f64;
    for _ in 0..50 {
        let mdp = random_mdp(&mut rng);
        let (s, a) = (mdp.n_states(), mdp.n_actions());
        let radius = vec![0.0; s * a];
        let evi = extended_value_iteration(s, a, mdp.mean_rewards(), mdp.transitions(), &radius, slack, 10_000_000).unwrap();
        let oracle = optimal_gain(&mdp, 1e-12).unwrap().gain;
        worst_gain = worst_gain.max((policy_gain(&mdp, &evi.policy) - oracle).abs());

        let steps = 1000;
        let mut cuts: Vec<usize> = (0..s - 1).map(|_| rng.random_range(0..=steps)).collect();
        cuts.push(0);
        cuts.push(steps);
        cuts.sort_unstable();
        let p_hat: Vec<f64> = cuts.windows(2).map(|w| (w[1] - w[0]) as f64 / steps as f64).collect();
        let u: Vec<f64> = (0..s).map(|_| rng.random::<f64>()).collect();
        let budget = rng.random::<f64>() * 2.0;
        let (value, _) = inner_max(&p_hat, budget, &u);
        worst_inner = worst_inner.max((value - grid_max(&p_hat, budget, &u, steps)).abs());
    }
    outcome(
        worst_gain <= slack && worst_inner <= 2e-3,
        format!("max gain gap {worst_gain:.2e} (<= 1e-6), max inner-max gap {worst_inner:.2e} (<= 2e-3)"),
    )
}

fn heavy_q_optimism() -> Outcome {
    let (s, a, horizon, episodes, delta, eps) = (3, 2, 3, 1000u64, 0.1, 0.05);
    let means = [0.2, 0.6, 0.9, 0.1, 0.4, 0.7];
    let rewards: Vec<RewardDist> = means.iter().map(|&m| RewardDist::stable(m, 1.1, 0.5).unwrap()).collect();
    let transitions = vec![
        0.7, 0.2, 0.1, 0.1, 0.1, 0.8, //
        0.3, 0.4, 0.3, 0.0, 0.9, 0.1, //
        0.5, 0.0, 0.5, 0.2, 0.2, 0.6,
    ];
    let mdp = TabularMDP::new(s, a, transitions, rewards, InitialState::Fixed(0)).unwrap();
    let u = mdp.reward_dists().iter().map(|d| d.raw_moment_bound(eps).unwrap()).fold(0.0, f64::max);
    let r_max = means.iter().copied().fold(0.0, f64::max);
    let q_star = finite_horizon_values(&EpisodicMDP::stationary(mdp.clone(), horizon, episodes).unwrap()).q;

    let runs = 100;
    let mut optimistic_runs = 0;
    for seed in 0..runs {
        let mut agent = HeavyQ::new(HeavyQParams::heavy(s, a, horizon, episodes, delta, eps, u, r_max)).unwrap();
        let mut rng = SimRng::seed_from_u64(seed);
        let mut env_rng = SimRng::seed_from_u64(seed);
        env_rng.set_stream(1);
        let mut always = true;
        for _ in 0..episodes {
            let mut state = mdp.initial_state(&mut env_rng);
            for h in 0..horizon {
                let action = agent.act(state, h, &mut rng).unwrap();
                let (next, reward) = mdp.step(state, action, &mut env_rng).unwrap();
                agent.observe(&Transition { state, action, reward, next_state: next, step: h }).unwrap();
                state = next;
            }
            agent.end_episode();
            always &= (0..horizon)
                .all(|h| (0..s).all(|x| (0..a).all(|y| agent.q(h, x, y) >= q_star[h][x * a + y] - 1e-12)));
        }
        optimistic_runs += u32::from(always);
    }
    let share = f64::from(optimistic_runs) / runs as f64;
    outcome(share >= 0.9, format!("Q >= Q* at every episode in {optimistic_runs}/{runs} runs"))
}

fn run_preset(name: &str) -> ExperimentResult {
    let (cfg, base) = ExperimentConfig::load(&configs_dir().join(name)).unwrap();
    run_experiment(&cfg, &base, None).unwrap()
}

fn best_for<'a>(best: &[&'a SummaryRow], agent: &str) -> &'a SummaryRow {
    best.iter().find(|r| r.agent == agent).unwrap_or_else(|| panic!("no agent {agent}"))
}

fn ordering(result: &ExperimentResult) -> (bool, String) {
    let best = best_conf_scales(&result.summary);
    let get = |name| best_for(&best, name);
    let (hu, hq, ql, ps) = (get("heavy_ucrl2"), get("heavy_q"), get("qlearning"), get("psrl"));
    let pass = hu.mean_cum_reward > ql.mean_cum_reward
        && hq.mean_cum_reward > ql.mean_cum_reward
        && hu.mean_cum_reward > ps.mean_cum_reward
        && hq.mean_cum_reward > ps.mean_cum_reward;
    let detail = [hu, hq, ql, ps]
        .iter()
        .map(|r| format!("{}@{} reward {:.0} pseudo-regret {:.0}", r.agent, r.conf_scale, r.mean_cum_reward, r.mean_cum_pseudo_regret))
        .collect::<Vec<_>>()
        .join(", ");
    (pass, detail)
}

fn changing_restart() -> Outcome {
    let steps = restart_steps(1, 1.0, 64).unwrap();
    let schedule_ok = steps == vec![1, 8, 27, 64];
    let result = run_preset("changing-doublechain.toml");
    let final_regret = |agent: &str| {
        result.summary.iter().find(|r| r.agent == agent).map(|r| r.mean_cum_pseudo_regret).unwrap()
    };
    let (plain, restarted) = (final_regret("heavy_ucrl2"), final_regret("restart_heavy_ucrl2"));
    outcome(
        schedule_ok && restarted < plain,
        format!("schedule {steps:?}; final pseudo-regret restarted {restarted:.0} vs plain {plain:.0}"),
    )
}

const DETERMINISM_CONFIG: &str = r#"
seeds = [0, 1, 2]
episodes = 300
horizon = 10
conf_scales = [0.1, 1.0]
record_stride = 50

[env]
kind = "double_chain"

[[agents]]
algo = "heavy_ucrl2"

[[agents]]
algo = "heavy_q"

[[agents]]
algo = "qlearning"

[[agents]]
algo = "psrl"

[[agents]]
algo = "ucrl2"
reward_ci = "valid"
"#;

fn cli_run(config: &Path, out: &Path, jobs: Option<&str>) -> (Vec<u8>, Vec<u8>) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_heavy-rl"));
    cmd.arg("run").arg("--config").arg(config).arg("--out").arg(out);
    if let Some(jobs) = jobs {
        cmd.args(["--jobs", jobs]);
    }
    let status = cmd.output().expect("spawn heavy-rl");
    assert!(status.status.success(), "run failed: {}", String::from_utf8_lossy(&status.stderr));
    (std::fs::read(out.join("traces.csv")).unwrap(), std::fs::read(out.join("summary.csv")).unwrap())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("det.toml");
    std::fs::write(&config, DETERMINISM_CONFIG).unwrap();
    let first = cli_run(&config, &dir.path().join("a"), None);
    let second = cli_run(&config, &dir.path().join("b"), None);
    let parallel = cli_run(&config, &dir.path().join("c"), Some("8"));
    let serial = cli_run(&config, &dir.path().join("d"), Some("1"));
    let repeat_ok = first == second;
    let jobs_ok = parallel == serial && parallel == first;
    outcome(
        repeat_ok && jobs_ok && !first.0.is_empty(),
        format!("repeat identical: {repeat_ok}; --jobs 8 vs --jobs 1 identical: {jobs_ok}; {} trace bytes", first.0.len()),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut timed = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let mut o = f();
        o.detail = format!("{} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    timed("1 robust estimator concentration", &robust_concentration);
    timed("2 empirical mean undercoverage", &empirical_failure);
    timed("3 sequence inequality", &sequence_inequality);
    timed("4 learning-rate inequality", &learning_rate_inequality);
    timed("5 extended value iteration", &evi_correctness);
    timed("6 heavy-q optimism", &heavy_q_optimism);

    let start = Instant::now();
    let dc = run_preset("doublechain-desk.toml");
    let dc_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let sa = run_preset("sixarms-desk.toml");
    let sa_secs = start.elapsed().as_secs_f64();
    timed("7 desk ordering", &|| {
        let (dc_ok, dc_detail) = ordering(&dc);
        let (sa_ok, sa_detail) = ordering(&sa);
        outcome(
            dc_ok && sa_ok,
            format!(
                "double_chain {} ({dc_detail}) [{dc_secs:.0}s]; six_arms {} ({sa_detail}) [{sa_secs:.0}s]",
                if dc_ok { "ok" } else { "violated" },
                if sa_ok { "ok" } else { "violated" }
            ),
        )
    });
    timed("8 valid ucrl2 lowest", &|| {
        let best = best_conf_scales(&dc.summary);
        let valid = best_for(&best, "ucrl2_valid");
        let others_min = best
            .iter()
            .filter(|r| r.agent != "ucrl2_valid")
            .map(|r| r.mean_cum_reward)
            .fold(f64::INFINITY, f64::min);
        outcome(
            valid.mean_cum_reward < others_min,
            format!("ucrl2_valid {:.0} vs lowest other {others_min:.0}", valid.mean_cum_reward),
        )
    });
    timed("9 restart schedule", &changing_restart);
    timed("10 determinism", &determinism);

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
