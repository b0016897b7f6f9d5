//! Plain-text MDP files.
//!
//! ```text
//! # comment lines and trailing comments start with '#'
//! S A
//! p(0|0,0) ... p(S-1|0,0)        <- S*A transition rows, state-major
//! ...
//! gaussian 0.5 0.1               <- S*A reward records, same order
//! stable 1.0 1.1 1.0             <- mean alpha scale
//! bernoulli 2.0 0.5 0.0          <- scale p offset
//! constant 0.0
//! ...
//! init 0                         <- optional, defaults to state 0
//! ```

use std::fmt::Write as _;

use super::{EnvError, InitialState, TabularMDP};
use crate::distributions::RewardDist;

fn parse_err(line: usize, message: impl Into<String>) -> EnvError {
    EnvError::Parse { line, message: message.into() }
}

fn numbers<T: std::str::FromStr>(line: usize, fields: &[&str]) -> Result<Vec<T>, EnvError> {
    fields.iter().map(|f| f.parse::<T>().map_err(|_| parse_err(line, format!("cannot parse '{f}'")))).collect()
}

fn parse_reward(line: usize, fields: &[&str]) -> Result<RewardDist, EnvError> {
    let (kind, rest) = fields.split_first().ok_or_else(|| parse_err(line, "empty reward record"))?;
    let args: Vec<f64> = numbers(line, rest)?;
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(parse_err(line, format!("'{kind}' takes {n} parameters, got {}", args.len())))
        }
    };
    let dist = match *kind {
        "gaussian" => {
            arity(2)?;
            RewardDist::gaussian(args[0], args[1])
        }
        "stable" => {
            arity(3)?;
            RewardDist::stable(args[0], args[1], args[2])
        }
        "bernoulli" => {
            arity(3)?;
            RewardDist::bernoulli(args[0], args[1], args[2])
        }
        "constant" => {
            arity(1)?;
            RewardDist::constant(args[0])
        }
        other => return Err(parse_err(line, format!("unknown reward kind '{other}'"))),
    };
    dist.map_err(|e| parse_err(line, e.to_string()))
}

pub fn parse_mdp(text: &str) -> Result<TabularMDP, EnvError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, f)| !f.is_empty());

    let (line, header) = lines.next().ok_or_else(|| parse_err(0, "missing 'S A' header"))?;
    let dims: Vec<usize> = numbers(line, &header)?;
    let [n_states, n_actions] = dims[..] else {
        return Err(parse_err(line, "header must be 'S A'"));
    };
    if n_states == 0 || n_actions == 0 {
        return Err(parse_err(line, "S and A must be positive"));
    }

    let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let (line, fields) = lines.next().ok_or_else(|| parse_err(0, "too few transition rows"))?;
        if fields.len() != n_states {
            return Err(parse_err(line, format!("expected {n_states} probabilities, got {}", fields.len())));
        }
        transitions.extend(numbers::<f64>(line, &fields)?);
    }

    let mut rewards = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states * n_actions {
        let (line, fields) = lines.next().ok_or_else(|| parse_err(0, "too few reward records"))?;
        rewards.push(parse_reward(line, &fields)?);
    }

    let mut initial = InitialState::Fixed(0);
    if let Some((line, fields)) = lines.next() {
        match fields[..] {
            ["init", s] => initial = InitialState::Fixed(numbers::<usize>(line, &[s])?[0]),
            _ => return Err(parse_err(line, "expected 'init s' or end of file")),
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_err(line, "unexpected trailing content"));
    }
    TabularMDP::new(n_states, n_actions, transitions, rewards, initial)
}

/// Inverse of [`parse_mdp`]. Only fixed initial states can be written.
pub fn write_mdp(mdp: &TabularMDP) -> Result<String, EnvError> {
    let init = match mdp.initial() {
        InitialState::Fixed(s) => *s,
        InitialState::Distribution(_) => {
            return Err(EnvError::InvalidParameter("initial distributions have no text form".into()))
        }
    };
    let (n_states, n_actions) = (mdp.n_states(), mdp.n_actions());
    let mut out = format!("{n_states} {n_actions}\n");
    for s in 0..n_states {
        for a in 0..n_actions {
            let row: Vec<String> = mdp.row(s, a).iter().map(|p| format!("{p:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    for dist in mdp.reward_dists() {
        let _ = match *dist {
            RewardDist::Gaussian { mean, stddev } => writeln!(out, "gaussian {mean:?} {stddev:?}"),
            RewardDist::SymmetricStable { mean, alpha, scale } => writeln!(out, "stable {mean:?} {alpha:?} {scale:?}"),
            RewardDist::ScaledBernoulli { scale, p, offset } => writeln!(out, "bernoulli {scale:?} {p:?} {offset:?}"),
            RewardDist::Constant { value } => writeln!(out, "constant {value:?}"),
        };
    }
    let _ = writeln!(out, "init {init}");
    Ok(out)
}
