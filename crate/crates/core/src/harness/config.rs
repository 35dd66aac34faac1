//! Flat `key = value` training configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are a
//! configuration error so that typos cannot silently fall back to defaults.
//! Keys that are absent take the per-environment defaults of
//! [`TrainConfig::for_env`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dist_rl::DEFAULT_NUM_QUANTILES;
use crate::envs::{AcrobotEnv, AcrobotParams, CartpoleEnv, CartpoleParams, CmdpModel};
use crate::error::{Error, Result};
use crate::safe_rl::{tolerance_schedule, ToleranceConstants, DEFAULT_SLICES_PER_STATE, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvId {
    Cartpole,
    Acrobot,
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvId::Cartpole => "cartpole",
            EnvId::Acrobot => "acrobot",
        })
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartpole" => Ok(EnvId::Cartpole),
            "acrobot" => Ok(EnvId::Acrobot),
            other => Err(Error::Config(format!("unknown env '{other}'"))),
        }
    }
}

/// Fixed tolerance or the schedule `c₁/((1−γ)√T) + c₂/((1−γ) T m^{H/4})`
/// with `T` the number of training episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauMode {
    Fixed(f64),
    Scheduled(ToleranceConstants),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: EnvId,
    pub episodes: usize,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Hidden width `m`.
    pub width: usize,
    /// Hidden layer count `H`.
    pub layers: usize,
    pub dt: f64,
    /// Odd degree of the emitted slice polynomials.
    pub degree: u32,
    pub tau: TauMode,
    pub num_quantiles: usize,
    /// Slices emitted per decision step.
    pub slice_count: usize,
    pub seed: u64,
    /// Constraint bounds `b_i`.
    pub bounds: Vec<f64>,
    /// Gaussian exploration scale at the first and last episode.
    pub noise_start: f64,
    pub noise_end: f64,
    /// Candidate actions drawn around `π(s)` per decision step.
    pub candidates: usize,
    /// Initial step size of the variational descent on the candidates.
    pub variational_lr: f64,
    /// Episodes per constraint estimate (once per training episode).
    pub estimate_episodes: usize,
    /// Episodes used for the untrained baseline and final evaluation.
    pub eval_episodes: usize,
    /// Environment steps between gradient updates.
    pub update_every: usize,
    /// Updates per update point (the `K_td` inner iterations).
    pub updates_per_step: usize,
    /// Cap on updates within one episode; 0 means no cap.
    pub max_updates_per_episode: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    /// Updates between target-network refreshes; 0 bootstraps from the live nets.
    pub target_update_every: usize,
}

impl TrainConfig {
    /// Table-1 settings for `env`.
    pub fn for_env(env: EnvId) -> Self {
        let (lr, bounds) = match env {
            EnvId::Cartpole => (0.0005, vec![60.0, 60.0]),
            EnvId::Acrobot => (0.005, vec![120.0, 120.0]),
        };
        Self {
            env,
            episodes: 1000,
            gamma: 0.998,
            batch_size: 128,
            replay_capacity: 1_000_000,
            actor_lr: lr,
            critic_lr: lr,
            width: 128,
            layers: 2,
            dt: 0.02,
            degree: 3,
            tau: TauMode::Fixed(DEFAULT_TOLERANCE),
            num_quantiles: DEFAULT_NUM_QUANTILES,
            slice_count: DEFAULT_SLICES_PER_STATE,
            seed: 0,
            bounds,
            noise_start: 0.5,
            noise_end: 0.05,
            candidates: 8,
            variational_lr: 0.1,
            estimate_episodes: 1,
            eval_episodes: 20,
            update_every: 1,
            updates_per_step: 1,
            max_updates_per_episode: 0,
            warmup: 128,
            target_update_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("dt", self.dt),
            ("variational_lr", self.variational_lr),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("width", self.width),
            ("layers", self.layers),
            ("num_quantiles", self.num_quantiles),
            ("slice_count", self.slice_count),
            ("candidates", self.candidates),
            ("estimate_episodes", self.estimate_episodes),
            ("eval_episodes", self.eval_episodes),
            ("update_every", self.update_every),
            ("updates_per_step", self.updates_per_step),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.degree % 2 == 0 {
            return bad(format!("degree must be odd, got {}", self.degree));
        }
        if !(self.noise_start >= 0.0 && self.noise_end >= 0.0) {
            return bad("exploration noise must be non-negative".into());
        }
        if self.bounds.len() != 2 {
            return bad(format!("{} has 2 constraints, got {} bounds", self.env, self.bounds.len()));
        }
        if let TauMode::Fixed(t) = self.tau {
            if !(t >= 0.0) {
                return bad(format!("tau_c must be non-negative, got {t}"));
            }
        }
        Ok(())
    }

    /// The tolerance used by every update of a run.
    pub fn tolerance(&self) -> Result<f64> {
        match self.tau {
            TauMode::Fixed(t) => Ok(t),
            TauMode::Scheduled(c) => tolerance_schedule(self.episodes.max(1), self.width, self.layers, self.gamma, c),
        }
    }

    pub fn make_env(&self) -> Box<dyn CmdpModel> {
        match self.env {
            EnvId::Cartpole => {
                let params = CartpoleParams {
                    dt: self.dt,
                    ..CartpoleParams::default()
                };
                Box::new(CartpoleEnv::new(params, self.gamma, self.bounds.clone()))
            }
            EnvId::Acrobot => {
                let params = AcrobotParams {
                    dt: self.dt,
                    ..AcrobotParams::default()
                };
                Box::new(AcrobotEnv::new(params, self.gamma, self.bounds.clone()))
            }
        }
    }

    /// Parses a config file body; `env` must come before any other key it
    /// would change the defaults of, so it is resolved first.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            pairs.push((n + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let env = pairs
            .iter()
            .find(|(_, k, _)| k == "env")
            .map(|(_, _, v)| v.parse())
            .transpose()?
            .unwrap_or(EnvId::Cartpole);
        let mut cfg = Self::for_env(env);
        let mut tau_mode = None;
        let mut tau_value = None;
        let mut constants = ToleranceConstants::default();
        for (line, key, value) in &pairs {
            let ctx = |e: Error| Error::Config(format!("line {line}: {key}: {e}"));
            match key.as_str() {
                "env" => {}
                "episodes" => cfg.episodes = num(value).map_err(ctx)?,
                "gamma" => cfg.gamma = num(value).map_err(ctx)?,
                "batch_size" => cfg.batch_size = num(value).map_err(ctx)?,
                "replay_capacity" => cfg.replay_capacity = num(value).map_err(ctx)?,
                "actor_lr" => cfg.actor_lr = num(value).map_err(ctx)?,
                "critic_lr" => cfg.critic_lr = num(value).map_err(ctx)?,
                "width" => cfg.width = num(value).map_err(ctx)?,
                "layers" => cfg.layers = num(value).map_err(ctx)?,
                "dt" => cfg.dt = num(value).map_err(ctx)?,
                "degree" => cfg.degree = num(value).map_err(ctx)?,
                "tau_mode" => tau_mode = Some(value.clone()),
                "tau_c" => tau_value = Some(num::<f64>(value).map_err(ctx)?),
                "tau_c1" => constants.c1 = num(value).map_err(ctx)?,
                "tau_c2" => constants.c2 = num(value).map_err(ctx)?,
                "num_quantiles" => cfg.num_quantiles = num(value).map_err(ctx)?,
                "slice_count" => cfg.slice_count = num(value).map_err(ctx)?,
                "seed" => cfg.seed = num(value).map_err(ctx)?,
                "bounds" => {
                    cfg.bounds = value
                        .split(',')
                        .map(|s| num::<f64>(s.trim()))
                        .collect::<Result<_>>()
                        .map_err(ctx)?
                }
                "noise_start" => cfg.noise_start = num(value).map_err(ctx)?,
                "noise_end" => cfg.noise_end = num(value).map_err(ctx)?,
                "candidates" => cfg.candidates = num(value).map_err(ctx)?,
                "variational_lr" => cfg.variational_lr = num(value).map_err(ctx)?,
                "estimate_episodes" => cfg.estimate_episodes = num(value).map_err(ctx)?,
                "eval_episodes" => cfg.eval_episodes = num(value).map_err(ctx)?,
                "update_every" => cfg.update_every = num(value).map_err(ctx)?,
                "updates_per_step" => cfg.updates_per_step = num(value).map_err(ctx)?,
                "max_updates_per_episode" => cfg.max_updates_per_episode = num(value).map_err(ctx)?,
                "warmup" => cfg.warmup = num(value).map_err(ctx)?,
                "target_update_every" => cfg.target_update_every = num(value).map_err(ctx)?,
                other => return Err(Error::Config(format!("line {line}: unknown key '{other}'"))),
            }
        }
        cfg.tau = match tau_mode.as_deref() {
            None | Some("fixed") => TauMode::Fixed(tau_value.unwrap_or(DEFAULT_TOLERANCE)),
            Some("scheduled") => TauMode::Scheduled(constants),
            Some(other) => return Err(Error::Config(format!("unknown tau_mode '{other}'"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serializes every key; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let bounds: Vec<String> = self.bounds.iter().map(|b| b.to_string()).collect();
        let tau = match self.tau {
            TauMode::Fixed(t) => format!("tau_mode = fixed\ntau_c = {t}\n"),
            TauMode::Scheduled(c) => format!("tau_mode = scheduled\ntau_c1 = {}\ntau_c2 = {}\n", c.c1, c.c2),
        };
        format!(
            "env = {}\nepisodes = {}\ngamma = {}\nbatch_size = {}\nreplay_capacity = {}\nactor_lr = {}\n\
             critic_lr = {}\nwidth = {}\nlayers = {}\ndt = {}\ndegree = {}\n{tau}num_quantiles = {}\n\
             slice_count = {}\nseed = {}\nbounds = {}\nnoise_start = {}\nnoise_end = {}\ncandidates = {}\n\
             variational_lr = {}\nestimate_episodes = {}\neval_episodes = {}\nupdate_every = {}\nupdates_per_step = {}\nmax_updates_per_episode = {}\nwarmup = {}\n\
             target_update_every = {}\n",
            self.env,
            self.episodes,
            self.gamma,
            self.batch_size,
            self.replay_capacity,
            self.actor_lr,
            self.critic_lr,
            self.width,
            self.layers,
            self.dt,
            self.degree,
            self.num_quantiles,
            self.slice_count,
            self.seed,
            bounds.join(", "),
            self.noise_start,
            self.noise_end,
            self.candidates,
            self.variational_lr,
            self.estimate_episodes,
            self.eval_episodes,
            self.update_every,
            self.updates_per_step,
            self.max_updates_per_episode,
            self.warmup,
            self.target_update_every,
        )
    }
}

fn num<T: FromStr>(s: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    s.parse().map_err(|e: T::Err| Error::Config(format!("cannot parse '{s}': {e}")))
}
