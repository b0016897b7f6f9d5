//! Tabular reinforcement learning under heavy-tailed rewards.
//!
//! The crate is split along the data flow of an experiment:
//!
//! * [`distributions`]: reward laws (Gaussian, symmetric stable, scaled
//!   Bernoulli, constant) with exact means and moment bounds.
//! * [`estimators`]: streaming empirical, truncated and median-of-means
//!   estimators with confidence radii.
//! * [`environments`]: tabular MDPs, benchmark builders and exact gain /
//!   finite-horizon value oracles.
//! * [`agents`]: Heavy-UCRL2, Heavy-Q-Learning and the light-tailed baselines
//!   behind one [`agents::Agent`] trait.
//! * [`bounds`]: closed-form regret bounds and numerical lemma checks.
//! * [`harness`]: config files, seeded multi-run execution, CSV and SVG output.

pub mod agents;
pub mod bounds;
pub mod distributions;
pub mod environments;
pub mod estimators;
pub mod harness;

/// Random source used throughout the crate. ChaCha supports independent
/// streams per seed, which keeps every run reproducible on its own.
pub type SimRng = rand_chacha::ChaCha8Rng;
