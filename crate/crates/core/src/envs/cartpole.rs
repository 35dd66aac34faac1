//! Cart-pole with position-zone and pole-angle constraints.
//!
//! Classical dynamics (cart 1 kg, pole 0.1 kg, half-length 0.5 m, ±10 N
//! push) integrated with semi-implicit Euler. The cart is confined to
//! `[-2.4, 2.4]`: hitting a wall clamps the position and zeroes the cart
//! velocity. Episodes end when the pole leans past 12° or after 250 steps.

use crate::error::{Error, Result};
use crate::rng_from_seed;
use rand::Rng;

use super::{CmdpModel, EnvStep};

/// Closed intervals of cart position that incur the first utility.
pub const PENALTY_ZONES: [(f64, f64); 5] = [(-2.4, -2.2), (-1.3, -1.1), (-0.1, 0.1), (1.1, 1.3), (2.2, 2.4)];

#[derive(Debug, Clone, PartialEq)]
pub struct CartpoleParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub half_length: f64,
    pub force_magnitude: f64,
    pub dt: f64,
    pub position_limit: f64,
    pub failure_angle_deg: f64,
    pub penalty_angle_deg: f64,
    pub max_steps: usize,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force_magnitude: 10.0,
            dt: 0.02,
            position_limit: 2.4,
            failure_angle_deg: 12.0,
            penalty_angle_deg: 6.0,
            max_steps: 250,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartpoleState {
    /// m
    pub x: f64,
    /// m/s
    pub x_dot: f64,
    /// rad, 0 is upright
    pub theta: f64,
    /// rad/s
    pub theta_dot: f64,
}

impl CartpoleState {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartpoleOutcome {
    pub state: CartpoleState,
    pub reward: f64,
    pub g1: f64,
    pub g2: f64,
    /// Pole fell past the failure angle.
    pub done: bool,
}

/// `1` inside any [`PENALTY_ZONES`] interval (endpoints included).
pub fn position_penalty(x: f64) -> f64 {
    if PENALTY_ZONES.iter().any(|&(lo, hi)| lo <= x && x <= hi) {
        1.0
    } else {
        0.0
    }
}

/// `1` when the pole leans more than `limit_deg` degrees.
pub fn angle_penalty(theta: f64, limit_deg: f64) -> f64 {
    if theta.abs() > limit_deg.to_radians() {
        1.0
    } else {
        0.0
    }
}

/// Continuous actor output to push force: sign picks the direction.
pub fn force_from_action(action: f64, force_magnitude: f64) -> f64 {
    if action >= 0.0 {
        force_magnitude
    } else {
        -force_magnitude
    }
}

/// Advances the physics by one step under `force` newtons.
pub fn cartpole_dynamics(s: &CartpoleState, force: f64, p: &CartpoleParams) -> CartpoleState {
    let total_mass = p.cart_mass + p.pole_mass;
    let pole_mass_length = p.pole_mass * p.half_length;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc =
        (p.gravity * sin - cos * temp) / (p.half_length * (4.0 / 3.0 - p.pole_mass * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

    let mut x_dot = s.x_dot + p.dt * x_acc;
    let mut x = s.x + p.dt * x_dot;
    let theta_dot = s.theta_dot + p.dt * theta_acc;
    let theta = s.theta + p.dt * theta_dot;
    if x.abs() > p.position_limit {
        x = x.clamp(-p.position_limit, p.position_limit);
        x_dot = 0.0;
    }
    CartpoleState {
        x,
        x_dot,
        theta,
        theta_dot,
    }
}

/// One step from `state` with the actor's scalar `action` (mapped by sign).
pub fn cartpole_step(state: &CartpoleState, action: f64, p: &CartpoleParams) -> Result<CartpoleOutcome> {
    if !state.is_finite() || !action.is_finite() {
        return Err(Error::Environment(format!("non-finite cartpole input {state:?}, action {action}")));
    }
    let next = cartpole_dynamics(state, force_from_action(action, p.force_magnitude), p);
    if !next.is_finite() {
        return Err(Error::Environment("cartpole state diverged".into()));
    }
    Ok(CartpoleOutcome {
        state: next,
        reward: 1.0,
        g1: position_penalty(state.x),
        g2: angle_penalty(state.theta, p.penalty_angle_deg),
        done: next.theta.abs() > p.failure_angle_deg.to_radians(),
    })
}

/// Episodic wrapper with a step counter and constraint bounds.
#[derive(Debug, Clone)]
pub struct CartpoleEnv {
    pub params: CartpoleParams,
    pub gamma: f64,
    pub bounds: Vec<f64>,
    state: CartpoleState,
    steps: usize,
}

impl CartpoleEnv {
    pub fn new(params: CartpoleParams, gamma: f64, bounds: Vec<f64>) -> Self {
        Self {
            params,
            gamma,
            bounds,
            state: CartpoleState::default(),
            steps: 0,
        }
    }

    pub fn state(&self) -> CartpoleState {
        self.state
    }

    pub fn set_state(&mut self, state: CartpoleState) {
        self.state = state;
        self.steps = 0;
    }
}

impl CmdpModel for CartpoleEnv {
    fn name(&self) -> &str {
        "cartpole"
    }

    fn observation_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn num_constraints(&self) -> usize {
        2
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    fn reward_range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn max_steps(&self) -> usize {
        self.params.max_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let mut u = || rng.random_range(-0.05..0.05);
        self.state = CartpoleState {
            x: u(),
            x_dot: u(),
            theta: u(),
            theta_dot: u(),
        };
        self.steps = 0;
        self.state.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        let a = *action
            .first()
            .ok_or_else(|| Error::Environment("empty action".into()))?;
        let out = cartpole_step(&self.state, a, &self.params)?;
        self.state = out.state;
        self.steps += 1;
        Ok(EnvStep {
            observation: self.state.to_vec(),
            reward: out.reward,
            utilities: vec![out.g1, out.g2],
            terminated: out.done,
            truncated: !out.done && self.steps >= self.params.max_steps,
        })
    }

    fn state_vector(&self) -> Vec<f64> {
        self.state.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zone_examples() {
        let p = CartpoleParams::default();
        let at = |x: f64, deg: f64| CartpoleState {
            x,
            theta: deg.to_radians(),
            ..Default::default()
        };
        let o = cartpole_step(&at(0.0, 0.0), 1.0, &p).unwrap();
        assert_eq!(o.g1, 1.0);
        let o = cartpole_step(&at(0.5, 0.0), 1.0, &p).unwrap();
        assert_eq!((o.g1, o.g2), (0.0, 0.0));
        let o = cartpole_step(&at(0.5, 7.0), 1.0, &p).unwrap();
        assert_eq!(o.g2, 1.0);
        assert_eq!(o.reward, 1.0);
    }

    #[test]
    fn zone_endpoints_are_closed() {
        for &(lo, hi) in &PENALTY_ZONES {
            assert_eq!(position_penalty(lo), 1.0);
            assert_eq!(position_penalty(hi), 1.0);
        }
        assert_eq!(position_penalty(0.1 + 1e-12), 0.0);
        assert_eq!(position_penalty(-1.1 + 1e-12), 0.0);
        assert_eq!(position_penalty(1.0), 0.0);
        assert_eq!(angle_penalty(6f64.to_radians(), 6.0), 0.0);
    }

    #[test]
    fn falls_past_twelve_degrees() {
        let p = CartpoleParams::default();
        let s = CartpoleState {
            theta: 11.99f64.to_radians(),
            theta_dot: 1.0,
            ..Default::default()
        };
        assert!(cartpole_step(&s, 1.0, &p).unwrap().done);
    }

    #[test]
    fn wall_clamps_position() {
        let p = CartpoleParams::default();
        let s = CartpoleState {
            x: 2.39,
            x_dot: 3.0,
            ..Default::default()
        };
        let o = cartpole_step(&s, 1.0, &p).unwrap();
        assert_eq!(o.state.x, 2.4);
        assert_eq!(o.state.x_dot, 0.0);
    }

    #[test]
    fn non_finite_state_is_fault() {
        let p = CartpoleParams::default();
        let s = CartpoleState {
            x: f64::NAN,
            ..Default::default()
        };
        assert!(matches!(cartpole_step(&s, 1.0, &p), Err(Error::Environment(_))));
    }

    #[test]
    fn time_limit_truncates() {
        let mut env = CartpoleEnv::new(CartpoleParams::default(), 0.998, vec![1.0, 1.0]);
        env.reset(0);
        let mut last = None;
        for t in 0..250 {
            // pin the pole upright so only the clock can end the episode
            env.state.theta = 0.0;
            env.state.theta_dot = 0.0;
            let s = env.step(&[if t % 2 == 0 { 1.0 } else { -1.0 }]).unwrap();
            last = Some(s.clone());
            if s.done() {
                assert_eq!(t, 249);
            }
        }
        let last = last.unwrap();
        assert!(last.truncated && !last.terminated);
    }
}
