use awavo::envs::{
    acrobot_energy, acrobot_step, angle_penalty, cartpole_dynamics, position_penalty, AcrobotParams, AcrobotState,
    CartpoleParams, CartpoleState, CmdpModel, PENALTY_ZONES,
};
use awavo::harness::{EnvId, TrainConfig};
use proptest::prelude::*;

#[test]
fn upright_pole_without_force_stays_upright() {
    let p = CartpoleParams::default();
    let mut s = CartpoleState { x: 0.3, x_dot: 0.0, theta: 0.0, theta_dot: 0.0 };
    for _ in 0..10_000 {
        s = cartpole_dynamics(&s, 0.0, &p);
        assert_eq!(s.theta, 0.0);
        assert_eq!(s.theta_dot, 0.0);
    }
    assert_eq!(s.x, 0.3);
}

#[test]
fn unactuated_acrobot_conserves_energy() {
    let p = AcrobotParams::default();
    for (t1, t2) in [(1.0, 0.5), (0.3, -0.8), (2.0, 0.0)] {
        let mut s = AcrobotState { theta1: t1, theta2: t2, dtheta1: 0.0, dtheta2: 0.0 };
        let e0 = acrobot_energy(&s, &p);
        for _ in 0..500 {
            s = acrobot_step(&s, 0.0, &p).unwrap().state;
        }
        let drift = (acrobot_energy(&s, &p) - e0).abs() / e0.abs();
        assert!(drift <= 0.01, "start ({t1}, {t2}): drift {drift}");
    }
}

fn rollout(env: &mut dyn CmdpModel, seed: u64) -> Vec<u64> {
    let mut bits: Vec<u64> = env.reset(seed).iter().map(|v| v.to_bits()).collect();
    for t in 0..200 {
        let a = ((t * 7919) % 13) as f64 / 6.0 - 1.0;
        let step = env.step(&[a]).unwrap();
        bits.extend(step.observation.iter().chain(&step.utilities).map(|v| v.to_bits()));
        bits.push(step.reward.to_bits());
        if step.done() {
            break;
        }
    }
    bits
}

#[test]
fn same_seed_and_actions_give_identical_episodes() {
    for env in [EnvId::Cartpole, EnvId::Acrobot] {
        let cfg = TrainConfig::for_env(env);
        let a = rollout(cfg.make_env().as_mut(), 5);
        let b = rollout(cfg.make_env().as_mut(), 5);
        assert_eq!(a, b);
        assert_ne!(a, rollout(cfg.make_env().as_mut(), 6));
    }
}

proptest! {
    #[test]
    fn position_zones_are_closed_intervals(zone in 0usize..5, u in 0.0f64..=1.0, outside in 0.0f64..0.1) {
        let (lo, hi) = PENALTY_ZONES[zone];
        prop_assert_eq!(position_penalty(lo), 1.0);
        prop_assert_eq!(position_penalty(hi), 1.0);
        prop_assert_eq!(position_penalty(lo + u * (hi - lo)), 1.0);
        // the gaps between zones are at least 0.8 wide
        let gap = 1e-9 + outside;
        prop_assert_eq!(position_penalty(lo - gap), 0.0);
        prop_assert_eq!(position_penalty(hi + gap), 0.0);
    }

    #[test]
    fn angle_penalty_switches_past_six_degrees(deg in -30.0f64..30.0) {
        let expected = if deg.abs() > 6.0 { 1.0 } else { 0.0 };
        prop_assert_eq!(angle_penalty(deg.to_radians(), 6.0), expected);
    }
}
