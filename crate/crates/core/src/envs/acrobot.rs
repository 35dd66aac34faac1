//! Two-link underactuated pendulum ("book" dynamics, unit masses and
//! lengths), integrated with RK4.
//!
//! Angles are measured from the hanging position; `θ2` is relative to link 1.
//! Reward is `1` while the end effector sits above height 0.5. Utility 1
//! fires when torque is applied while link 1 turns anticlockwise
//! (`θ̇1 < 0`); utility 2 when link 2 turns anticlockwise relative to link 1.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng_from_seed;

use super::{CmdpModel, EnvStep};

#[derive(Debug, Clone, PartialEq)]
pub struct AcrobotParams {
    pub link_length_1: f64,
    pub link_length_2: f64,
    pub link_mass_1: f64,
    pub link_mass_2: f64,
    pub com_1: f64,
    pub com_2: f64,
    pub moment_of_inertia: f64,
    pub gravity: f64,
    pub dt: f64,
    pub max_velocity_1: f64,
    pub max_velocity_2: f64,
    pub height_threshold: f64,
    pub max_steps: usize,
}

impl Default for AcrobotParams {
    fn default() -> Self {
        Self {
            link_length_1: 1.0,
            link_length_2: 1.0,
            link_mass_1: 1.0,
            link_mass_2: 1.0,
            com_1: 0.5,
            com_2: 0.5,
            moment_of_inertia: 1.0,
            gravity: 9.8,
            dt: 0.02,
            max_velocity_1: 4.0 * PI,
            max_velocity_2: 9.0 * PI,
            height_threshold: 0.5,
            max_steps: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcrobotState {
    pub theta1: f64,
    pub theta2: f64,
    pub dtheta1: f64,
    pub dtheta2: f64,
}

impl AcrobotState {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.theta1, self.theta2, self.dtheta1, self.dtheta2]
    }

    /// Network observation: `(cos θ1, sin θ1, cos θ2, sin θ2, θ̇1, θ̇2)`.
    pub fn observation(&self) -> Vec<f64> {
        vec![
            self.theta1.cos(),
            self.theta1.sin(),
            self.theta2.cos(),
            self.theta2.sin(),
            self.dtheta1,
            self.dtheta2,
        ]
    }

    fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcrobotOutcome {
    pub state: AcrobotState,
    pub reward: f64,
    pub g1: f64,
    pub g2: f64,
    pub done: bool,
}

/// Tip height above the pivot.
pub fn end_effector_height(s: &AcrobotState) -> f64 {
    -s.theta1.cos() - (s.theta1 + s.theta2).cos()
}

/// Continuous actor output to torque in `{-1, 0, 1}`.
pub fn torque_from_action(action: f64) -> f64 {
    if action > 1.0 / 3.0 {
        1.0
    } else if action < -1.0 / 3.0 {
        -1.0
    } else {
        0.0
    }
}

fn derivatives(s: [f64; 4], torque: f64, p: &AcrobotParams) -> [f64; 4] {
    let (m1, m2) = (p.link_mass_1, p.link_mass_2);
    let (l1, lc1, lc2) = (p.link_length_1, p.com_1, p.com_2);
    let (i1, i2) = (p.moment_of_inertia, p.moment_of_inertia);
    let g = p.gravity;
    let [theta1, theta2, dtheta1, dtheta2] = s;
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn rk4(s: [f64; 4], torque: f64, p: &AcrobotParams) -> [f64; 4] {
    let h = p.dt;
    let add = |a: [f64; 4], b: [f64; 4], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]];
    let k1 = derivatives(s, torque, p);
    let k2 = derivatives(add(s, k1, h / 2.0), torque, p);
    let k3 = derivatives(add(s, k2, h / 2.0), torque, p);
    let k4 = derivatives(add(s, k3, h), torque, p);
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn wrap(angle: f64) -> f64 {
    (angle + PI).rem_euclid(2.0 * PI) - PI
}

/// Total mechanical energy (kinetic + potential, zero potential at the pivot).
pub fn acrobot_energy(s: &AcrobotState, p: &AcrobotParams) -> f64 {
    let (m1, m2) = (p.link_mass_1, p.link_mass_2);
    let (l1, lc1, lc2) = (p.link_length_1, p.com_1, p.com_2);
    let (i1, i2) = (p.moment_of_inertia, p.moment_of_inertia);
    let c2 = s.theta2.cos();
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2;
    let d3 = m2 * lc2 * lc2 + i2;
    let kinetic = 0.5 * d1 * s.dtheta1 * s.dtheta1 + d2 * s.dtheta1 * s.dtheta2 + 0.5 * d3 * s.dtheta2 * s.dtheta2;
    let potential = -m1 * p.gravity * lc1 * s.theta1.cos()
        - m2 * p.gravity * (l1 * s.theta1.cos() + lc2 * (s.theta1 + s.theta2).cos());
    kinetic + potential
}

/// One RK4 step under `torque` (newton-metres, applied at the elbow).
pub fn acrobot_step(state: &AcrobotState, torque: f64, p: &AcrobotParams) -> Result<AcrobotOutcome> {
    if !state.is_finite() || !torque.is_finite() {
        return Err(Error::Environment(format!("non-finite acrobot input {state:?}, torque {torque}")));
    }
    let [t1, t2, d1, d2] = rk4(state.to_vec().try_into().unwrap(), torque, p);
    let next = AcrobotState {
        theta1: wrap(t1),
        theta2: wrap(t2),
        dtheta1: d1.clamp(-p.max_velocity_1, p.max_velocity_1),
        dtheta2: d2.clamp(-p.max_velocity_2, p.max_velocity_2),
    };
    if !next.is_finite() {
        return Err(Error::Environment("acrobot state diverged".into()));
    }
    Ok(AcrobotOutcome {
        state: next,
        reward: if end_effector_height(state) > p.height_threshold {
            1.0
        } else {
            0.0
        },
        g1: if torque != 0.0 && state.dtheta1 < 0.0 { 1.0 } else { 0.0 },
        g2: if state.dtheta2 < 0.0 { 1.0 } else { 0.0 },
        done: false,
    })
}

#[derive(Debug, Clone)]
pub struct AcrobotEnv {
    pub params: AcrobotParams,
    pub gamma: f64,
    pub bounds: Vec<f64>,
    state: AcrobotState,
    steps: usize,
}

impl AcrobotEnv {
    pub fn new(params: AcrobotParams, gamma: f64, bounds: Vec<f64>) -> Self {
        Self {
            params,
            gamma,
            bounds,
            state: AcrobotState::default(),
            steps: 0,
        }
    }

    pub fn state(&self) -> AcrobotState {
        self.state
    }
}

impl CmdpModel for AcrobotEnv {
    fn name(&self) -> &str {
        "acrobot"
    }

    fn observation_dim(&self) -> usize {
        6
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
        let mut u = || rng.random_range(-0.1..0.1);
        self.state = AcrobotState {
            theta1: u(),
            theta2: u(),
            dtheta1: u(),
            dtheta2: u(),
        };
        self.steps = 0;
        self.state.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        let a = *action
            .first()
            .ok_or_else(|| Error::Environment("empty action".into()))?;
        let out = acrobot_step(&self.state, torque_from_action(a), &self.params)?;
        self.state = out.state;
        self.steps += 1;
        Ok(EnvStep {
            observation: self.state.observation(),
            reward: out.reward,
            utilities: vec![out.g1, out.g2],
            terminated: false,
            truncated: self.steps >= self.params.max_steps,
        })
    }

    fn state_vector(&self) -> Vec<f64> {
        self.state.to_vec()
    }
}
