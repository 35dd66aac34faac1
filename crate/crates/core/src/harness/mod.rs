//! Experiment plumbing: configuration, the training loop, learning curves,
//! convergence-rate fitting and the property suites behind `verify`.

mod config;
mod curve;
mod rate;
mod train;
pub mod verify;

pub use config::{EnvId, TauMode, TrainConfig};
pub use curve::{curve_header, CurveRow, CurveWriter, LearningCurve, TimingLog};
pub use train::{build_nets, exploration_scale, greedy_trace, logged_branch_is_sound, run_training, select_action, TrainingOutcome};
pub use rate::{fit_rate, moving_average, RateFit, RateOutcome, DEFAULT_BURN_IN, MIN_FIT_POINTS, SMOOTHING_WINDOW};
