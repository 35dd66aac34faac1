//! Property suites run by `awavo verify` and `awavo oracle`.
//!
//! Every suite draws its instances from a seeded generator and reports the
//! largest violation it saw together with the pass threshold, so a report is
//! a pure function of `(suite sizes, seed)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::dist_rl::{
    actor_gradient, actor_objective, bellman_eval, critic_gradient_with_targets, dbar, quantile_loss,
    quantile_projection, ActionSquash, NetLayout, PolicyNets, QuantileDistribution, StateActionDistMap, Transition,
};
use crate::envs::{random_tabular_cmdp, TabularCmdp};
use crate::error::Result;
use crate::inference::{decompose_interpretation, LatentFactorModel, RewardOperatorFamily};
use crate::nn::MlpParams;
use crate::ot_metrics::{
    check_pseudo_metric, wasserstein_1d, wasserstein_oracle, DiscreteMeasure, OneDMeasure, Order,
    RandomTripleSampler,
};
use crate::safe_rl::primal_policy_iteration;
use crate::Rng as SeededRng;

/// Finite-difference step of the gradient checks.
pub const FD_STEP: f64 = 1e-5;
/// Instances with a rectifier or quantile-loss kink closer than this are redrawn.
pub const KINK_MARGIN: f64 = 1e-3;
/// Absolute floor of the relative-error denominator. Central differences of
/// an O(1) loss carry roundoff near `1e-16 / FD_STEP ≈ 1e-11`; this floor
/// keeps that noise two orders below the 1e-4 tolerance on components whose
/// true value is near zero.
pub const RELATIVE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub max_violation: f64,
    pub threshold: f64,
    pub instances: usize,
}

impl SuiteReport {
    fn new(name: impl Into<String>, max_violation: f64, threshold: f64, instances: usize) -> Self {
        Self {
            name: name.into(),
            max_violation,
            threshold,
            instances,
        }
    }

    pub fn passed(&self) -> bool {
        self.max_violation <= self.threshold
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:.3e} {}",
            self.name,
            self.max_violation,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn rng(seed: u64, tag: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(tag))
}

fn random_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Random 1-D measure with up to `max_atoms` atoms; uniform weights half the time.
pub fn random_1d<R: Rng + ?Sized>(max_atoms: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rng.random_range(1..=max_atoms);
    let positions: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
    let weights = if rng.random_bool(0.5) {
        vec![1.0 / n as f64; n]
    } else {
        random_weights(n, rng)
    };
    Ok((positions, weights))
}

/// Fast 1-D Wasserstein against the brute-force coupling oracle.
pub fn ot_oracle_suite(trials: usize, k: Order, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng(seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (xa, wa) = random_1d(8, &mut rng)?;
        let (xb, wb) = random_1d(8, &mut rng)?;
        // equal-size uniform pairs exercise the permutation path of the oracle
        let (xb, wb) = if wa.iter().all(|&w| w == wa[0]) && rng.random_bool(0.5) {
            let xb: Vec<f64> = (0..xa.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            (xb, wa.clone())
        } else {
            (xb, wb)
        };
        let fast = wasserstein_1d(&OneDMeasure::new(xa.clone(), wa.clone())?, &OneDMeasure::new(xb.clone(), wb.clone())?, k)?;
        let brute = wasserstein_oracle(&DiscreteMeasure::from_scalars(&xa, wa)?, &DiscreteMeasure::from_scalars(&xb, wb)?, k)?;
        worst = worst.max((fast - brute).abs());
    }
    Ok(SuiteReport::new(format!("ot_oracle_k{k}"), worst, 1e-9, trials))
}

/// Non-negativity, symmetry, triangle inequality and zero self-distance of
/// the A-GSWD on random triples with shared slices.
pub fn pseudo_metric_suite(trials: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    let mut out = Vec::new();
    for (tag, degree, k) in [(2, None, Order::Finite(1.0)), (3, Some(3), Order::Finite(2.0)), (4, Some(3), Order::Infinity)] {
        let sampler = RandomTripleSampler {
            dim: 2,
            max_atoms: 6,
            num_slices: 10,
            degree,
        };
        let mut rng = rng(seed, tag);
        let r = check_pseudo_metric(|_| sampler.sample(&mut rng), k, trials)?;
        let label = format!("{}_k{k}", if degree.is_some() { "poly" } else { "linear" });
        out.push(SuiteReport::new(format!("nonnegativity_{label}"), r.non_negativity, 0.0, trials));
        out.push(SuiteReport::new(format!("symmetry_{label}"), r.symmetry, 1e-12, trials));
        out.push(SuiteReport::new(format!("triangle_{label}"), r.triangle, 1e-9, trials));
        out.push(SuiteReport::new(format!("self_distance_{label}"), r.self_distance, 0.0, trials));
    }
    Ok(out)
}

fn random_map<R: Rng + ?Sized>(cmdp: &TabularCmdp, n: usize, rng: &mut R) -> Result<StateActionDistMap> {
    StateActionDistMap::from_fn(1, cmdp.num_states(), cmdp.num_actions(), |_, _, _| {
        QuantileDistribution::from_unsorted((0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 5.0).collect())
    })
}

/// `d̄_∞(Π𝓣^π Z₁, Π𝓣^π Z₂) ≤ d̄_∞(Z₁, Z₂)` on random tabular MDPs.
pub fn contraction_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng(seed, 5);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let ns = rng.random_range(1..=4);
        let na = rng.random_range(1..=3);
        let gamma = rng.random_range(0.0..0.99);
        let cmdp = random_tabular_cmdp(ns, na, 0, seed.wrapping_add(t as u64))?.with_gamma(gamma)?;
        let n = rng.random_range(1..=8);
        let z1 = random_map(&cmdp, n, &mut rng)?;
        let z2 = random_map(&cmdp, n, &mut rng)?;
        let policy: Vec<usize> = (0..ns).map(|_| rng.random_range(0..na)).collect();
        let before = dbar(&z1, &z2, Order::Infinity)?;
        let after = dbar(
            &bellman_eval(&z1, &policy, &cmdp, 0)?,
            &bellman_eval(&z2, &policy, &cmdp, 0)?,
            Order::Infinity,
        )?;
        worst = worst.max(after - before);
    }
    Ok(SuiteReport::new("contraction_dbar_inf", worst.max(0.0), 1e-12, trials))
}

/// Iterated evaluation on a one-state, one-action MDP reaches `r/(1−γ)`.
pub fn fixed_point_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng(seed, 6);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let r = rng.random_range(-1.0..1.0);
        let gamma = rng.random_range(0.0..0.9);
        let cmdp = TabularCmdp::new(vec![vec![vec![1.0]]], vec![vec![r]], vec![], vec![], gamma, vec![1.0])?;
        let mut z = StateActionDistMap::constant(1, 1, 1, 4, 0.0)?;
        for _ in 0..2000 {
            let next = bellman_eval(&z, &[0], &cmdp, 0)?;
            let moved = dbar(&next, &z, Order::Infinity)?;
            z = next;
            if moved == 0.0 {
                break;
            }
        }
        let target = r / (1.0 - gamma);
        for &a in z.get(0, 0, 0).atoms() {
            worst = worst.max((a - target).abs());
        }
    }
    Ok(SuiteReport::new("fixed_point_single_state", worst, 1e-8, trials))
}

/// `W₁(Π m, m) ≤ W₁(c, m)` for random `N`-atom candidates `c`.
pub fn projection_suite(measures: usize, candidates: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng(seed, 7);
    let w1 = Order::Finite(1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..measures {
        let (x, w) = random_1d(10, &mut rng)?;
        let m = OneDMeasure::new(x.clone(), w)?;
        let n = rng.random_range(1..=8);
        let proj = quantile_projection(&m, n)?;
        let best = wasserstein_1d(&proj.to_measure(), &m, w1)?;
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        for c in 0..candidates {
            let atoms: Vec<f64> = if c % 2 == 0 {
                (0..n).map(|_| rng.random_range(lo - 0.5..=hi + 0.5)).collect()
            } else {
                // small perturbations of the projection probe its neighbourhood
                proj.atoms().iter().map(|a| a + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect()
            };
            let cand = OneDMeasure::uniform(atoms)?;
            worst = worst.max(best - wasserstein_1d(&cand, &m, w1)?);
        }
    }
    Ok(SuiteReport::new("quantile_projection_minimal", worst.max(0.0), 1e-12, measures))
}

/// Smallest `|pre-activation|` of any hidden unit over the rows of `xs`.
pub fn min_hidden_preactivation(params: &MlpParams, xs: &[Vec<f64>]) -> f64 {
    let mut worst = f64::INFINITY;
    let last = params.layers().len() - 1;
    for x in xs {
        let mut a = x.clone();
        for (l, layer) in params.layers().iter().enumerate() {
            let z: Vec<f64> = layer
                .weights
                .rows()
                .into_iter()
                .zip(&layer.biases)
                .map(|(row, b)| row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect();
            if l < last {
                worst = z.iter().fold(worst, |m, v| m.min(v.abs()));
                a = z.into_iter().map(|v| v.max(0.0)).collect();
            } else {
                a = z;
            }
        }
    }
    worst
}

/// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)` with a
/// central difference of `f` around `theta`.
pub fn fd_relative_error(analytic: &[f64], theta: &[f64], mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut p = theta.to_vec();
    for (i, &g) in analytic.iter().enumerate() {
        p[i] = theta[i] + FD_STEP;
        let up = f(&p)?;
        p[i] = theta[i] - FD_STEP;
        let down = f(&p)?;
        p[i] = theta[i];
        let num = (up - down) / (2.0 * FD_STEP);
        worst = worst.max((g - num).abs() / g.abs().max(num.abs()).max(RELATIVE_FLOOR));
    }
    Ok(worst)
}

fn random_sizes<R: Rng + ?Sized>(rng: &mut R) -> Vec<usize> {
    let hidden = rng.random_range(1..=2);
    let mut s = vec![rng.random_range(1..=4)];
    s.extend((0..hidden).map(|_| rng.random_range(2..=6)));
    s.push(rng.random_range(1..=3));
    s
}

/// Network backward pass against central differences of `⟨u, f(x)⟩`.
pub fn nn_gradient_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng(seed, 8);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < trials {
        let sizes = random_sizes(&mut rng);
        let params = MlpParams::init(&sizes, &mut rng)?;
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.sample(StandardNormal)).collect();
        let u: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.sample(StandardNormal)).collect();
        if min_hidden_preactivation(&params, std::slice::from_ref(&x)) < KINK_MARGIN {
            continue;
        }
        let analytic = params.backward(&x, &u)?.params.to_flat();
        let mut probe = params.clone();
        let err = fd_relative_error(&analytic, &params.to_flat(), |theta| {
            probe.set_flat(theta)?;
            Ok(probe.forward(&x)?.iter().zip(&u).map(|(a, b)| a * b).sum())
        })?;
        worst = worst.max(err);
        done += 1;
    }
    Ok(SuiteReport::new("gradient_nn", worst, 1e-5, trials))
}

fn small_nets<R: Rng + ?Sized>(rng: &mut R, squash: ActionSquash) -> Result<PolicyNets> {
    let layout = NetLayout {
        observation_dim: 3,
        action_dim: 1,
        num_signals: 2,
        num_quantiles: 4,
        slice_count: 1,
        slice_degree: 3,
        squash,
    };
    PolicyNets::init(layout, &[6, 6], &[6, 6], rng.random())
}

fn random_batch<R: Rng + ?Sized>(nets: &PolicyNets, size: usize, rng: &mut R) -> Vec<Transition> {
    let l = &nets.layout;
    let v = |n: usize, rng: &mut R| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>();
    (0..size)
        .map(|_| Transition {
            state: v(l.observation_dim, rng),
            action: (0..l.action_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            reward: rng.random(),
            utilities: vec![rng.random(); l.num_signals - 1],
            next_state: v(l.observation_dim, rng),
            terminated: rng.random_bool(0.2),
        })
        .collect()
}

fn critic_rows(batch: &[Transition]) -> Vec<Vec<f64>> {
    batch
        .iter()
        .map(|t| t.state.iter().chain(&t.action).copied().collect())
        .collect()
}

/// Quantile-regression critic gradient against central differences of the
/// loss, with targets held fixed.
pub fn critic_gradient_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng(seed, 9);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < trials {
        let nets = small_nets(&mut rng, ActionSquash::Identity)?;
        let batch = random_batch(&nets, 4, &mut rng);
        let n = nets.layout.num_quantiles;
        let targets: Vec<(usize, ndarray::Array2<f64>)> = (0..nets.layout.num_signals)
            .map(|i| (i, ndarray::Array2::from_shape_fn((batch.len(), n), |_| rng.sample::<f64, _>(StandardNormal))))
            .collect();
        let rows = critic_rows(&batch);
        if min_hidden_preactivation(&nets.critic, &rows) < KINK_MARGIN {
            continue;
        }
        // the check loss bends where a predicted atom meets a target
        let mut gap = f64::INFINITY;
        for (r, x) in rows.iter().enumerate() {
            let out = nets.critic.forward(x)?;
            for (i, y) in &targets {
                for th in &out[i * n..(i + 1) * n] {
                    gap = y.row(r).iter().fold(gap, |m, v| m.min((v - th).abs()));
                }
            }
        }
        if gap < KINK_MARGIN {
            continue;
        }
        let analytic = critic_gradient_with_targets(&nets, &batch, &targets)?.grads.to_flat();
        let mut probe = nets.clone();
        let err = fd_relative_error(&analytic, &nets.critic.to_flat(), |theta| {
            probe.critic.set_flat(theta)?;
            quantile_loss(&probe, &batch, &targets)
        })?;
        worst = worst.max(err);
        done += 1;
    }
    Ok(SuiteReport::new("gradient_critic", worst, 1e-5, trials))
}

/// Deterministic policy gradient against central differences of the mean
/// critic value at `π(s)`.
pub fn actor_gradient_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng(seed, 10);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < trials {
        let squash = if done % 2 == 0 { ActionSquash::Tanh } else { ActionSquash::Identity };
        let nets = small_nets(&mut rng, squash)?;
        let states: Vec<Vec<f64>> = random_batch(&nets, 4, &mut rng).into_iter().map(|t| t.state).collect();
        let rows: Vec<Vec<f64>> = states
            .iter()
            .map(|s| Ok(s.iter().chain(&nets.act(s)?).copied().collect()))
            .collect::<Result<_>>()?;
        if min_hidden_preactivation(&nets.actor, &states) < KINK_MARGIN
            || min_hidden_preactivation(&nets.critic, &rows) < KINK_MARGIN
        {
            continue;
        }
        let signal = done % nets.layout.num_signals;
        let analytic = actor_gradient(&nets, &states, signal)?.to_flat();
        let mut probe = nets.clone();
        let err = fd_relative_error(&analytic, &nets.actor.to_flat(), |theta| {
            probe.actor.set_flat(theta)?;
            actor_objective(&probe, &states, signal)
        })?;
        worst = worst.max(err);
        done += 1;
    }
    Ok(SuiteReport::new("gradient_actor", worst, 1e-4, trials))
}

/// `p(τ|L_i) · p(L_i|D)` reconstructs `p(τ|D)`.
pub fn chain_rule_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng(seed, 11);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let factors = rng.random_range(1..=4);
        let model = LatentFactorModel {
            trajectory_posterior: 1.0 - rng.random::<f64>(),
            factor_posteriors: (0..factors).map(|_| 1.0 - rng.random::<f64>()).collect(),
        };
        for (part, pl) in decompose_interpretation(&model)?.iter().zip(&model.factor_posteriors) {
            worst = worst.max((part.ratio * pl - model.trajectory_posterior).abs());
        }
    }
    Ok(SuiteReport::new("chain_rule_reconstruction", worst, 1e-15, trials))
}

/// Primal policy iteration with the affine family on random 2×2 CMDPs:
/// largest `Q` drop and largest final gap to the exact optimum.
pub fn policy_iteration_suite(trials: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    let family = RewardOperatorFamily::affine(0.0, 1.0)?;
    let (mut drop, mut gap): (f64, f64) = (0.0, 0.0);
    let mut rng = rng(seed, 12);
    for t in 0..trials {
        let cmdp = random_tabular_cmdp(2, 2, 0, seed.wrapping_mul(7919).wrapping_add(t as u64))?;
        let start = [rng.random_range(0..2), rng.random_range(0..2)];
        let trace = primal_policy_iteration(&cmdp, &family, 0.5, &start, 50)?;
        drop = drop.max(trace.monotonicity_violation());
        gap = gap.max(trace.final_gap());
    }
    Ok(vec![
        SuiteReport::new("policy_improvement_monotone", drop, 1e-6, trials),
        SuiteReport::new("policy_iteration_optimal", gap, 1e-3, trials),
    ])
}

/// Everything `awavo verify` runs, at desk-check sizes.
pub fn verify_all(seed: u64) -> Result<Vec<SuiteReport>> {
    let mut out = Vec::new();
    for k in [Order::Finite(1.0), Order::Finite(2.0), Order::Infinity] {
        out.push(ot_oracle_suite(200, k, seed)?);
    }
    out.extend(pseudo_metric_suite(100, seed)?);
    out.push(contraction_suite(100, seed)?);
    out.push(fixed_point_suite(20, seed)?);
    out.push(projection_suite(20, 1000, seed)?);
    out.push(nn_gradient_suite(50, seed)?);
    out.push(critic_gradient_suite(30, seed)?);
    out.push(actor_gradient_suite(30, seed)?);
    out.push(chain_rule_suite(1000, seed)?);
    out.extend(policy_iteration_suite(20, seed)?);
    Ok(out)
}

/// Brute-force OT comparisons of `awavo oracle`.
pub fn oracle_all(seed: u64, trials: usize) -> Result<Vec<SuiteReport>> {
    [Order::Finite(1.0), Order::Finite(2.0), Order::Infinity]
        .into_iter()
        .map(|k| ot_oracle_suite(trials, k, seed))
        .collect()
}
