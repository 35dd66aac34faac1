use awavo::dist_rl::{
    bellman_eval, bellman_opt, dbar, quantile_projection, td_update, QuantileDistribution, StateActionDistMap,
};
use awavo::envs::{PolicyTable, TabularCmdp};
use awavo::harness::verify::{
    actor_gradient_suite, contraction_suite, critic_gradient_suite, projection_suite,
};
use awavo::ot_metrics::{OneDMeasure, Order};
use proptest::prelude::*;

/// Two states, two actions, deterministic moves: action 0 stays, action 1 switches.
fn switching_mdp(gamma: f64, rewards: [[f64; 2]; 2]) -> TabularCmdp {
    TabularCmdp::new(
        vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        ],
        rewards.iter().map(|r| r.to_vec()).collect(),
        vec![],
        vec![],
        gamma,
        vec![0.5, 0.5],
    )
    .unwrap()
}

#[test]
fn projected_evaluation_contracts_in_sup_wasserstein() {
    let report = contraction_suite(200, 3).unwrap();
    assert!(report.max_violation <= 1e-12, "{report}");
}

#[test]
fn evaluation_forgets_its_starting_point() {
    let cmdp = switching_mdp(0.8, [[0.3, 0.1], [0.0, 0.7]]);
    let policy = [1, 0];
    let mut rng = awavo::rng_from_seed(5);
    use rand::Rng;
    let mut a = StateActionDistMap::from_fn(1, 2, 2, |_, _, _| {
        QuantileDistribution::from_unsorted((0..5).map(|_| rng.random_range(-10.0..10.0)).collect())
    })
    .unwrap();
    let mut b = StateActionDistMap::constant(1, 2, 2, 5, 0.0).unwrap();
    for _ in 0..200 {
        a = bellman_eval(&a, &policy, &cmdp, 0).unwrap();
        b = bellman_eval(&b, &policy, &cmdp, 0).unwrap();
    }
    assert!(dbar(&a, &b, Order::Infinity).unwrap() < 1e-8);
}

#[test]
fn mean_of_evaluation_matches_value_iteration() {
    let gamma = 0.9;
    // rewards scaled so every return lies in [0, 1]: the start error is at most 1
    let r = [[0.02, 0.05], [0.1, 0.0]];
    let cmdp = switching_mdp(gamma, r);
    let policy = [1, 1];
    let exact = cmdp.q_values(&PolicyTable::deterministic(&policy, 2).unwrap(), 0).unwrap();
    let sweeps = (1e-6f64.ln() / gamma.ln()).ceil() as usize;
    let mut z = StateActionDistMap::constant(1, 2, 2, 4, 0.0).unwrap();
    for _ in 0..sweeps {
        z = bellman_eval(&z, &policy, &cmdp, 0).unwrap();
    }
    for s in 0..2 {
        for a in 0..2 {
            assert!((z.get(0, s, a).mean() - exact[s][a]).abs() < 1e-6);
        }
    }
}

#[test]
fn greedy_evaluation_reaches_optimal_values() {
    let cmdp = switching_mdp(0.9, [[0.2, 0.0], [1.0, 0.5]]);
    let optimal = cmdp.optimal_values(0, 1e-12).unwrap();
    let mut z = StateActionDistMap::constant(1, 2, 2, 3, 0.0).unwrap();
    for _ in 0..400 {
        z = bellman_opt(&z, &cmdp).unwrap();
    }
    for (s, v) in optimal.iter().enumerate() {
        let best = (0..2).map(|a| z.get(0, s, a).mean()).fold(f64::NEG_INFINITY, f64::max);
        assert!((best - v).abs() < 1e-9, "state {s}: {best} vs {v}");
    }
}

#[test]
fn projection_beats_random_candidates() {
    let report = projection_suite(100, 10_000, 9).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn td_error_decays_geometrically() {
    let gamma = 0.9;
    let l_td = 0.1;
    let cmdp = TabularCmdp::new(vec![vec![vec![1.0]]], vec![vec![1.0]], vec![], vec![], gamma, vec![1.0]).unwrap();
    let fixed = StateActionDistMap::constant(1, 1, 1, 4, 1.0 / (1.0 - gamma)).unwrap();
    let mut z = StateActionDistMap::constant(1, 1, 1, 4, 0.0).unwrap();
    let mut prev = dbar(&z, &fixed, Order::Infinity).unwrap();
    for _ in 0..50 {
        z = td_update(&z, (0, 0, 0), 0, l_td, &cmdp, &[0]).unwrap().0;
        let gap = dbar(&z, &fixed, Order::Infinity).unwrap();
        assert!((gap / prev - (1.0 - l_td * (1.0 - gamma))).abs() < 1e-9);
        prev = gap;
    }
}

#[test]
fn critic_and_actor_gradients_match_finite_differences() {
    let critic = critic_gradient_suite(100, 21).unwrap();
    let actor = actor_gradient_suite(100, 21).unwrap();
    assert!(critic.max_violation < 1e-5, "{critic}");
    assert!(actor.max_violation < 1e-4, "{actor}");
}

proptest! {
    #[test]
    fn projection_and_td_keep_atoms_sorted(
        xs in prop::collection::vec(-50.0f64..50.0, 1..12),
        n in 1usize..8,
        init in prop::collection::vec(-5.0f64..5.0, 6),
        l_td in 0.01f64..1.0,
    ) {
        let q = quantile_projection(&OneDMeasure::uniform(xs).unwrap(), n).unwrap();
        prop_assert!(q.atoms().windows(2).all(|w| w[0] <= w[1]));

        let cmdp = switching_mdp(0.9, [[1.0, -1.0], [0.5, 2.0]]);
        let mut it = init.chunks(3).cycle();
        let z = StateActionDistMap::from_fn(1, 2, 2, |_, _, _| {
            QuantileDistribution::from_unsorted(it.next().unwrap().to_vec())
        }).unwrap();
        let (next, delta) = td_update(&z, (0, 1, 1), 0, l_td, &cmdp, &[1, 0]).unwrap();
        prop_assert!(delta >= 0.0);
        prop_assert!(next.get(0, 0, 1).atoms().windows(2).all(|w| w[0] <= w[1]));
    }
}
