//! Adaptive sliced-Wasserstein variational optimization.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`ot_metrics`] | exact 1-D Wasserstein, brute-force coupling oracle, SWD / GSWD / A-GSWD |
//! | [`nn`] | fully connected ReLU network with hand-written backprop |
//! | [`dist_rl`] | quantile distributions, distributional Bellman operators, TD, actor/critic gradients |
//! | [`safe_rl`] | primal constrained policy updater, constraint estimation, adaptive slice emission |
//! | [`inference`] | reward-operator families, optimality likelihood, variational step, interpretation |
//! | [`envs`] | constrained Cartpole / Acrobot and random tabular CMDPs |
//! | [`harness`] | training loop, config and curve files, rate fitting, property suites |
//!
//! Every stochastic routine takes an explicit seed; nothing reads global state.

pub mod dist_rl;
pub mod envs;
pub mod error;
pub mod harness;
pub mod inference;
pub mod nn;
pub mod ot_metrics;
pub mod safe_rl;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used throughout; ChaCha keeps streams stable across platforms.
pub type Rng = ChaCha8Rng;

/// Seeded generator.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
