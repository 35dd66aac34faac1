//! Actor and quantile critic networks plus their batch gradients.
//!
//! The actor maps a state to `[raw action | slice head]`; the action is the
//! (optionally tanh-squashed) first `action_dim` outputs. The critic maps
//! `[state, action]` to `num_signals` blocks of `N` quantile atoms, block 0
//! for the reward and block `i` for utility `g^i`.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{validation, Error, Result};
use crate::nn::MlpParams;
use crate::ot_metrics::monomial_count;

use super::quantile::quantile_levels;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSquash {
    Identity,
    Tanh,
}

impl ActionSquash {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActionSquash::Identity => x,
            ActionSquash::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the squashed value `y`.
    fn slope(self, y: f64) -> f64 {
        match self {
            ActionSquash::Identity => 1.0,
            ActionSquash::Tanh => 1.0 - y * y,
        }
    }
}

/// Input and output widths of the actor and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct NetLayout {
    pub observation_dim: usize,
    pub action_dim: usize,
    /// `1 + p`: reward plus one per constraint.
    pub num_signals: usize,
    pub num_quantiles: usize,
    /// Slices emitted per state.
    pub slice_count: usize,
    pub slice_degree: u32,
    pub squash: ActionSquash,
}

impl NetLayout {
    /// Coefficients of one slice plus its offset.
    pub fn slice_block(&self) -> usize {
        monomial_count(self.action_dim, self.slice_degree) + 1
    }

    pub fn actor_output(&self) -> usize {
        self.action_dim + self.slice_count * self.slice_block()
    }

    pub fn critic_input(&self) -> usize {
        self.observation_dim + self.action_dim
    }

    pub fn critic_output(&self) -> usize {
        self.num_signals * self.num_quantiles
    }

    pub fn validate(&self) -> Result<()> {
        if self.observation_dim == 0 || self.action_dim == 0 || self.num_signals == 0 || self.num_quantiles == 0 {
            return Err(validation("network layout has a zero dimension"));
        }
        if self.slice_degree % 2 == 0 {
            return Err(validation("slice degree must be odd"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNets {
    pub actor: MlpParams,
    pub critic: MlpParams,
    pub layout: NetLayout,
}

impl PolicyNets {
    pub fn new(actor: MlpParams, critic: MlpParams, layout: NetLayout) -> Result<Self> {
        layout.validate()?;
        if actor.input_size() != layout.observation_dim || actor.output_size() != layout.actor_output() {
            return Err(validation(format!(
                "actor is {}→{}, layout needs {}→{}",
                actor.input_size(),
                actor.output_size(),
                layout.observation_dim,
                layout.actor_output()
            )));
        }
        if critic.input_size() != layout.critic_input() || critic.output_size() != layout.critic_output() {
            return Err(validation(format!(
                "critic is {}→{}, layout needs {}→{}",
                critic.input_size(),
                critic.output_size(),
                layout.critic_input(),
                layout.critic_output()
            )));
        }
        Ok(Self { actor, critic, layout })
    }

    /// Seeded initialization; `*_hidden` lists hidden widths.
    pub fn init(layout: NetLayout, actor_hidden: &[usize], critic_hidden: &[usize], seed: u64) -> Result<Self> {
        layout.validate()?;
        let mut rng = crate::rng_from_seed(seed);
        let sizes = |input: usize, hidden: &[usize], output: usize| {
            let mut v = vec![input];
            v.extend_from_slice(hidden);
            v.push(output);
            v
        };
        let actor = MlpParams::init(&sizes(layout.observation_dim, actor_hidden, layout.actor_output()), &mut rng)?;
        let critic = MlpParams::init(&sizes(layout.critic_input(), critic_hidden, layout.critic_output()), &mut rng)?;
        Self::new(actor, critic, layout)
    }

    /// Deterministic action `π(s)`.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        let out = self.actor.forward(state)?;
        Ok(out[..self.layout.action_dim]
            .iter()
            .map(|&x| self.layout.squash.apply(x))
            .collect())
    }

    /// Full actor output (action head unsquashed).
    pub fn actor_head(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(state)
    }

    pub fn act_batch(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        let out = self.actor.forward_batch(states)?;
        let squash = self.layout.squash;
        Ok(out.slice(s![.., ..self.layout.action_dim]).mapv(|x| squash.apply(x)))
    }

    /// Raw (unsorted) quantile outputs of signal `i` at `(state, action)`.
    pub fn quantiles(&self, state: &[f64], action: &[f64], i: usize) -> Result<Vec<f64>> {
        self.check_signal(i)?;
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        let out = self.critic.forward(&x)?;
        let n = self.layout.num_quantiles;
        Ok(out[i * n..(i + 1) * n].to_vec())
    }

    fn check_signal(&self, i: usize) -> Result<()> {
        if i >= self.layout.num_signals {
            return Err(validation(format!("signal index {i} out of range {}", self.layout.num_signals)));
        }
        Ok(())
    }
}

/// One environment transition; the reward and utilities belong to `state`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub utilities: Vec<f64>,
    pub next_state: Vec<f64>,
    /// True failure termination; time-limit truncation still bootstraps.
    pub terminated: bool,
}

impl Transition {
    /// Index 0 is the reward, `i ≥ 1` the `i`-th utility.
    pub fn signal(&self, i: usize) -> f64 {
        if i == 0 {
            self.reward
        } else {
            self.utilities[i - 1]
        }
    }
}

/// Fixed-capacity FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(validation("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
        })
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Uniform draw without replacement of `min(n, len)` transitions.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Transition> {
        let n = n.min(self.items.len());
        sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| self.items[i].clone())
            .collect()
    }
}

fn stack<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut count = 0;
    for r in rows {
        if r.len() != width {
            return Err(validation(format!("row of length {} where {width} expected", r.len())));
        }
        data.extend_from_slice(r);
        count += 1;
    }
    Array2::from_shape_vec((count, width), data).map_err(|e| validation(e.to_string()))
}

fn critic_inputs(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[states, actions]).expect("row counts agree")
}

fn check_batch(nets: &PolicyNets, batch: &[Transition]) -> Result<()> {
    if batch.is_empty() {
        return Err(validation("empty batch"));
    }
    let p = nets.layout.num_signals - 1;
    if batch.iter().any(|t| t.utilities.len() < p) {
        return Err(validation("transition carries fewer utilities than the critic has heads"));
    }
    Ok(())
}

/// Sorted TD targets `h_i + γ · sort(Z_i(s', π(s')))` (no bootstrap after a
/// failure), computed with `target` networks; shape `B × N`.
pub fn critic_targets(target: &PolicyNets, batch: &[Transition], i: usize, gamma: f64) -> Result<Array2<f64>> {
    target.check_signal(i)?;
    Ok(targets_for(target, batch, &[i], gamma)?.remove(0).1)
}

/// [`critic_targets`] for every signal, sharing one forward pass.
pub fn critic_targets_all(target: &PolicyNets, batch: &[Transition], gamma: f64) -> Result<Vec<(usize, Array2<f64>)>> {
    let all: Vec<usize> = (0..target.layout.num_signals).collect();
    targets_for(target, batch, &all, gamma)
}

fn targets_for(
    target: &PolicyNets,
    batch: &[Transition],
    signals: &[usize],
    gamma: f64,
) -> Result<Vec<(usize, Array2<f64>)>> {
    check_batch(target, batch)?;
    let l = &target.layout;
    let next = stack(batch.iter().map(|t| t.next_state.as_slice()), l.observation_dim)?;
    let next_actions = target.act_batch(next.view())?;
    let out = target.critic.forward_batch(critic_inputs(next.view(), next_actions.view()).view())?;
    let n = l.num_quantiles;
    signals
        .iter()
        .map(|&i| {
            let mut y = out.slice(s![.., i * n..(i + 1) * n]).to_owned();
            for (mut row, t) in y.axis_iter_mut(Axis(0)).zip(batch) {
                let mut v = row.to_vec();
                v.sort_by(f64::total_cmp);
                let keep = if t.terminated { 0.0 } else { gamma };
                for (dst, q) in row.iter_mut().zip(v) {
                    *dst = t.signal(i) + keep * q;
                }
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training("non-finite critic target".into()));
            }
            Ok((i, y))
        })
        .collect()
}

/// Quantile-regression check function `ρ_τ(u) = u (τ − 1{u < 0})`.
pub fn quantile_check_loss(u: f64, tau: f64) -> f64 {
    u * (tau - if u < 0.0 { 1.0 } else { 0.0 })
}

/// Sorted targets with prefix sums, so that the loss and subgradient at any
/// `θ` cost a binary search instead of a pass over all targets.
struct SortedTargets {
    values: Vec<f64>,
    /// `prefix[k] = Σ_{m<k} values[m]`
    prefix: Vec<f64>,
}

impl SortedTargets {
    fn new(targets: ndarray::ArrayView1<f64>) -> Self {
        let mut values = targets.to_vec();
        values.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        for v in &values {
            prefix.push(prefix.last().unwrap() + v);
        }
        Self { values, prefix }
    }

    /// `(#{y < θ}, #{y = θ})`
    fn counts(&self, theta: f64) -> (usize, usize) {
        let less = self.values.partition_point(|&y| y < theta);
        let upto = self.values.partition_point(|&y| y <= theta);
        (less, upto - less)
    }

    /// `Σ_k ρ_τ(y_k − θ) = τ (Σ y − Nθ) − Σ_{y<θ} (y − θ)`.
    fn check_loss(&self, theta: f64, tau: f64) -> f64 {
        let (less, _) = self.counts(theta);
        let n = self.values.len();
        let total = self.prefix[n] - n as f64 * theta;
        let below = self.prefix[less] - less as f64 * theta;
        tau * total - below
    }

    /// Minimum-norm element of `∂/∂θ Σ_k ρ_τ(y_k − θ)`.
    ///
    /// Away from ties this is `#{y_k < θ} − Nτ`; each tie widens the interval
    /// by one, and taking the element closest to zero makes the gradient
    /// vanish exactly when `θ` is a `τ`-quantile of the targets.
    fn subgradient(&self, theta: f64, tau: f64) -> f64 {
        let (less, ties) = self.counts(theta);
        let base = less as f64 - self.values.len() as f64 * tau;
        0f64.clamp(base, base + ties as f64)
    }
}

/// Critic update direction and diagnostics.
#[derive(Debug, Clone)]
pub struct CriticGradient {
    /// Gradient of the loss; apply with `Direction::Minimize`.
    pub grads: MlpParams,
    pub loss: f64,
    /// Largest `|sorted prediction − target|` over the batch.
    pub td_error: f64,
}

/// Batch loss `(1/B) Σ_n Σ_j (1/N) Σ_k ρ_{τ̂_j}(y_nk − θ_nj)` summed over the
/// listed signals, each with its fixed target matrix.
pub fn quantile_loss(nets: &PolicyNets, batch: &[Transition], signals: &[(usize, Array2<f64>)]) -> Result<f64> {
    Ok(critic_loss_and_grad(nets, batch, signals, false)?.loss)
}

fn critic_loss_and_grad(
    nets: &PolicyNets,
    batch: &[Transition],
    signals: &[(usize, Array2<f64>)],
    with_grad: bool,
) -> Result<CriticGradient> {
    check_batch(nets, batch)?;
    let l = &nets.layout;
    let n = l.num_quantiles;
    let b = batch.len();
    let states = stack(batch.iter().map(|t| t.state.as_slice()), l.observation_dim)?;
    let actions = stack(batch.iter().map(|t| t.action.as_slice()), l.action_dim)?;
    let cache = nets.critic.forward_cached(critic_inputs(states.view(), actions.view()).view())?;
    let out = cache.output();
    let taus = quantile_levels(n);
    let mut upstream = Array2::<f64>::zeros(out.dim());
    let mut loss = 0.0;
    let mut td_error: f64 = 0.0;
    let scale = 1.0 / (b as f64 * n as f64);
    for (i, y) in signals {
        nets.check_signal(*i)?;
        if y.dim() != (b, n) {
            return Err(validation("target matrix has the wrong shape"));
        }
        for r in 0..b {
            let theta = out.slice(s![r, i * n..(i + 1) * n]);
            let targets = SortedTargets::new(y.row(r));
            for (j, &th) in theta.iter().enumerate() {
                loss += scale * targets.check_loss(th, taus[j]);
                upstream[[r, i * n + j]] = scale * targets.subgradient(th, taus[j]);
            }
            let mut sorted = theta.to_vec();
            sorted.sort_by(f64::total_cmp);
            for (p, t) in sorted.iter().zip(&targets.values) {
                td_error = td_error.max((p - t).abs());
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::Training("non-finite critic loss".into()));
    }
    let grads = if with_grad {
        let g = nets.critic.backward_from_cache(&cache, upstream.view())?.params;
        if !g.all_finite() {
            return Err(Error::Training("non-finite critic gradient".into()));
        }
        g
    } else {
        nets.critic.zeros_like()
    };
    Ok(CriticGradient { grads, loss, td_error })
}

/// Critic gradient for explicitly supplied targets, one matrix per signal.
pub fn critic_gradient_with_targets(
    nets: &PolicyNets,
    batch: &[Transition],
    signals: &[(usize, Array2<f64>)],
) -> Result<CriticGradient> {
    critic_loss_and_grad(nets, batch, signals, true)
}

/// Gradient of the quantile-regression loss of signal `i`, bootstrapping
/// from the same networks (targets held fixed).
pub fn critic_gradient(nets: &PolicyNets, batch: &[Transition], i: usize, gamma: f64) -> Result<CriticGradient> {
    let y = critic_targets(nets, batch, i, gamma)?;
    critic_gradient_with_targets(nets, batch, &[(i, y)])
}

/// `(1/B) Σ_n mean_j Z_i(s_n, π(s_n))_j`.
pub fn actor_objective(nets: &PolicyNets, states: &[Vec<f64>], i: usize) -> Result<f64> {
    nets.check_signal(i)?;
    let l = &nets.layout;
    let x = stack(states.iter().map(Vec::as_slice), l.observation_dim)?;
    let a = nets.act_batch(x.view())?;
    let out = nets.critic.forward_batch(critic_inputs(x.view(), a.view()).view())?;
    let n = l.num_quantiles;
    Ok(out.slice(s![.., i * n..(i + 1) * n]).sum() / (states.len() as f64 * n as f64))
}

/// Deterministic policy gradient of [`actor_objective`] with respect to the
/// actor parameters, chained through the critic's action input.
pub fn actor_gradient(nets: &PolicyNets, states: &[Vec<f64>], i: usize) -> Result<MlpParams> {
    nets.check_signal(i)?;
    if states.is_empty() {
        return Err(validation("empty batch"));
    }
    let l = &nets.layout;
    let (b, n, da, ds) = (states.len(), l.num_quantiles, l.action_dim, l.observation_dim);
    let x = stack(states.iter().map(Vec::as_slice), ds)?;
    let actor_cache = nets.actor.forward_cached(x.view())?;
    let squash = l.squash;
    let a = actor_cache.output().slice(s![.., ..da]).mapv(|v| squash.apply(v));
    let critic_cache = nets.critic.forward_cached(critic_inputs(x.view(), a.view()).view())?;
    let mut up = Array2::<f64>::zeros(critic_cache.output().dim());
    up.slice_mut(s![.., i * n..(i + 1) * n]).fill(1.0 / (b as f64 * n as f64));
    let dq = nets.critic.input_gradient_from_cache(&critic_cache, up.view())?;
    let mut actor_up = Array2::<f64>::zeros(actor_cache.output().dim());
    for r in 0..b {
        for c in 0..da {
            actor_up[[r, c]] = dq[[r, ds + c]] * squash.slope(a[[r, c]]);
        }
    }
    let g = nets.actor.backward_from_cache(&actor_cache, actor_up.view())?.params;
    if !g.all_finite() {
        return Err(Error::Training("non-finite actor gradient".into()));
    }
    Ok(g)
}

/// Batch states of `batch`, in order.
pub fn batch_states(batch: &[Transition]) -> Vec<Vec<f64>> {
    batch.iter().map(|t| t.state.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;

    #[test]
    fn sorted_targets_match_direct_sums() {
        let y = ndarray::array![0.5, -1.0, 2.0, 0.5, 3.0];
        let t = SortedTargets::new(y.view());
        for theta in [-2.0, -1.0, 0.0, 0.5, 1.0, 3.0, 4.0] {
            for tau in [0.1, 0.5, 0.9] {
                let direct: f64 = y.iter().map(|&v| quantile_check_loss(v - theta, tau)).sum();
                assert!((t.check_loss(theta, tau) - direct).abs() < 1e-12);
            }
        }
        // two ties at 0.5, one below: interval [1 − 2.5, 3 − 2.5] contains 0
        assert_eq!(t.subgradient(0.5, 0.5), 0.0);
        assert_eq!(t.subgradient(0.0, 0.5), 1.0 - 2.5);
    }
    use ndarray::array;

    fn layout(obs: usize, n: usize, squash: ActionSquash) -> NetLayout {
        NetLayout {
            observation_dim: obs,
            action_dim: 1,
            num_signals: 1,
            num_quantiles: n,
            slice_count: 0,
            slice_degree: 3,
            squash,
        }
    }

    #[test]
    fn linear_critic_chain_rule() {
        // Q(s, a) = 2a, a = w s with w = 0.7, s = 1: dJ/dw = 2
        let actor = MlpParams::new(vec![Dense {
            weights: array![[0.7]],
            biases: array![0.0],
        }])
        .unwrap();
        let critic = MlpParams::new(vec![Dense {
            weights: array![[0.0, 2.0]],
            biases: array![0.0],
        }])
        .unwrap();
        let nets = PolicyNets::new(actor, critic, layout(1, 1, ActionSquash::Identity)).unwrap();
        let g = actor_gradient(&nets, &[vec![1.0]], 0).unwrap();
        assert!((g.layers()[0].weights[[0, 0]] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_critic_gives_zero_actor_gradient() {
        let l = layout(3, 4, ActionSquash::Tanh);
        let mut nets = PolicyNets::init(l, &[8], &[8], 1).unwrap();
        nets.critic = MlpParams::zeros(&nets.critic.layer_sizes()).unwrap();
        let g = actor_gradient(&nets, &[vec![0.1, 0.2, 0.3]], 0).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_on_target_has_zero_gradient() {
        let l = layout(2, 3, ActionSquash::Tanh);
        let mut nets = PolicyNets::init(l, &[6], &[6], 4).unwrap();
        nets.critic = MlpParams::new(vec![Dense {
            weights: Array2::zeros((3, 3)),
            biases: array![-1.0, 0.5, 2.0],
        }])
        .unwrap();
        let t = Transition {
            state: vec![0.3, -0.2],
            action: vec![0.1],
            reward: 0.0,
            utilities: vec![],
            next_state: vec![0.0, 0.0],
            terminated: false,
        };
        let y = nets.quantiles(&t.state, &t.action, 0).unwrap();
        let y = Array2::from_shape_vec((1, 3), y).unwrap();
        let t_clone = t.clone();
        let g = critic_gradient_with_targets(&nets, &[t], &[(0, y)]).unwrap();
        assert!(g.grads.to_flat().iter().all(|&v| v.abs() < 1e-15));
        assert_eq!(g.td_error, 0.0);

        // all atoms tied with all targets is also a minimizer
        nets.critic = MlpParams::zeros(&[3, 3]).unwrap();
        let g = critic_gradient_with_targets(&nets, &[t_clone], &[(0, Array2::zeros((1, 3)))]).unwrap();
        assert!(g.grads.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn replay_is_fifo_and_samples_distinct() {
        let mut buf = ReplayBuffer::new(3).unwrap();
        for k in 0..5 {
            buf.push(Transition {
                state: vec![k as f64],
                action: vec![0.0],
                reward: 0.0,
                utilities: vec![],
                next_state: vec![0.0],
                terminated: false,
            });
        }
        assert_eq!(buf.len(), 3);
        let mut rng = crate::rng_from_seed(0);
        let mut seen: Vec<f64> = buf.sample(10, &mut rng).iter().map(|t| t.state[0]).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, vec![2.0, 3.0, 4.0]);
    }
}
