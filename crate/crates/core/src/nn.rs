//! Fully connected ReLU network with explicit reverse-mode gradients.
//!
//! Hidden layers use a rectifier (subgradient 0 at 0), the output layer is
//! affine. Batched passes treat rows as samples so the heavy lifting is a
//! handful of matrix products.
//!
//! # Checkpoint format
//!
//! Plain UTF-8 text, one token group per line:
//!
//! ```text
//! awavo-mlp v1
//! sizes 4 128 128 1
//! <value>
//! <value>
//! ...
//! ```
//!
//! `sizes` lists the input width, every hidden width and the output width.
//! Values follow layer by layer: the weight matrix in row-major order
//! (`out` rows of `in` columns), then the `out` biases. Each value is written
//! in the shortest scientific form that parses back to the same `f64`.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{validation, Error, Result};
use crate::rng_from_seed;

const CHECKPOINT_MAGIC: &str = "awavo-mlp v1";

/// One affine layer; `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Array2::zeros((output, input)),
            biases: Array1::zeros(output),
        }
    }

    pub fn input_size(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_size(&self) -> usize {
        self.weights.nrows()
    }
}

/// Parameters of an MLP. Also used as the gradient record, which has the
/// same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Dense>,
}

/// Intermediate activations of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    // activations[0] is the input, activations[l] the input of layer l
    activations: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// Gradients returned by a backward pass.
#[derive(Debug, Clone)]
pub struct Backprop {
    /// Parameter gradients summed over the batch.
    pub params: MlpParams,
    /// Gradient with respect to each input row.
    pub input: Array2<f64>,
}

/// Whether an update climbs or descends the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        }
    }
}

impl MlpParams {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(validation("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_size() != pair[1].input_size() {
                return Err(validation(format!(
                    "layer shapes do not chain: {} outputs into {} inputs",
                    pair[0].output_size(),
                    pair[1].input_size()
                )));
            }
        }
        for l in &layers {
            if l.biases.len() != l.output_size() {
                return Err(validation("bias length must equal layer output size"));
            }
        }
        let params = Self { layers };
        if !params.all_finite() {
            return Err(validation("parameters must be finite"));
        }
        Ok(params)
    }

    /// All-zero parameters for the given `sizes` (input, hidden..., output).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(validation("sizes need input and output widths >= 1"));
        }
        Self::new(sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect())
    }

    /// Weights and biases drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        for layer in &mut p.layers {
            let bound = 1.0 / (layer.input_size() as f64).sqrt();
            layer
                .weights
                .iter_mut()
                .for_each(|w| *w = rng.random_range(-bound..bound));
            layer
                .biases
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-bound..bound));
        }
        Ok(p)
    }

    pub fn init_seeded(sizes: &[usize], seed: u64) -> Result<Self> {
        Self::init(sizes, &mut rng_from_seed(seed))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_size(), l.output_size()))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(self.layers.iter().map(Dense::output_size));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().unwrap().output_size()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|x| x.is_finite()))
    }

    /// Parameters in checkpoint order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(validation(format!(
                "expected {} values, got {}",
                self.num_params(),
                values.len()
            )));
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = *it.next().unwrap());
            l.biases.iter_mut().for_each(|b| *b = *it.next().unwrap());
        }
        Ok(())
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &MlpParams) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.scaled_add(alpha, &b.weights);
            a.biases.scaled_add(alpha, &b.biases);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for l in &mut self.layers {
            l.weights *= alpha;
            l.biases *= alpha;
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_size() {
            return Err(validation(format!(
                "input has {} features, network expects {}",
                cols,
                self.input_size()
            )));
        }
        Ok(())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| validation(e.to_string()))?;
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            a = a.dot(&layer.weights.t()) + &layer.biases;
            if l < last {
                a.mapv_inplace(relu);
            }
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t()) + &layer.biases;
            if l < last {
                z.mapv_inplace(relu);
            }
            activations.push(std::mem::replace(&mut a, z));
        }
        Ok(ForwardCache {
            activations,
            output: a,
        })
    }

    /// Gradients of `Σ_rows ⟨upstream_row, f(x_row)⟩`.
    pub fn backward_from_cache(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<Backprop> {
        if upstream.dim() != cache.output.dim() {
            return Err(validation(format!(
                "upstream shape {:?} does not match output shape {:?}",
                upstream.dim(),
                cache.output.dim()
            )));
        }
        let mut grads = self.zeros_like();
        let mut delta = upstream.to_owned();
        for l in (0..self.layers.len()).rev() {
            let input = &cache.activations[l];
            grads.layers[l].weights = delta.t().dot(input);
            grads.layers[l].biases = delta.sum_axis(Axis(0));
            let mut prev = delta.dot(&self.layers[l].weights);
            if l > 0 {
                // rectifier mask; the stored activation is positive iff the pre-activation was
                ndarray::Zip::from(&mut prev)
                    .and(input)
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0
                        }
                    });
            }
            delta = prev;
        }
        Ok(Backprop {
            params: grads,
            input: delta,
        })
    }

    /// Input gradient only; skips the parameter gradients.
    pub fn input_gradient_from_cache(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<Array2<f64>> {
        if upstream.dim() != cache.output.dim() {
            return Err(validation("upstream shape does not match output shape"));
        }
        let mut delta = upstream.to_owned();
        for l in (0..self.layers.len()).rev() {
            let mut prev = delta.dot(&self.layers[l].weights);
            if l > 0 {
                ndarray::Zip::from(&mut prev)
                    .and(&cache.activations[l])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0
                        }
                    });
            }
            delta = prev;
        }
        Ok(delta)
    }

    pub fn backward_batch(&self, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<Backprop> {
        let cache = self.forward_cached(x)?;
        self.backward_from_cache(&cache, upstream)
    }

    /// Single-sample backward pass.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Backprop> {
        let xv = ArrayView2::from_shape((1, x.len()), x).map_err(|e| validation(e.to_string()))?;
        let uv = ArrayView2::from_shape((1, upstream.len()), upstream).map_err(|e| validation(e.to_string()))?;
        self.backward_batch(xv, uv)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        let sizes: Vec<String> = self.layer_sizes().iter().map(|s| s.to_string()).collect();
        writeln!(w, "sizes {}", sizes.join(" "))?;
        for v in self.to_flat() {
            writeln!(w, "{v:e}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("unexpected end of checkpoint".into()))?
                .map_err(Error::from)
        };
        if next()?.trim() != CHECKPOINT_MAGIC {
            return Err(Error::Parse("not an awavo-mlp v1 checkpoint".into()));
        }
        let header = next()?;
        let sizes = header
            .trim()
            .strip_prefix("sizes ")
            .ok_or_else(|| Error::Parse("missing sizes line".into()))?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mut params = Self::zeros(&sizes)?;
        let mut values = Vec::with_capacity(params.num_params());
        for _ in 0..params.num_params() {
            let line = next()?;
            values.push(
                line.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{e}: {line:?}")))?,
            );
        }
        params.set_flat(&values)?;
        if !params.all_finite() {
            return Err(Error::Parse("checkpoint holds non-finite values".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_text(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(f))
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn forward(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    params.forward(x)
}

pub fn backward(params: &MlpParams, x: &[f64], upstream: &[f64]) -> Result<MlpParams> {
    Ok(params.backward(x, upstream)?.params)
}

/// `params + sign · lr · grads`.
pub fn sgd_step(params: &MlpParams, grads: &MlpParams, learning_rate: f64, direction: Direction) -> Result<MlpParams> {
    if !(learning_rate > 0.0) || !learning_rate.is_finite() {
        return Err(validation(format!("learning rate must be > 0, got {learning_rate}")));
    }
    if params.layer_sizes() != grads.layer_sizes() {
        return Err(validation("gradient shape does not match parameters"));
    }
    if !grads.all_finite() {
        return Err(Error::Training("non-finite gradient".into()));
    }
    let mut out = params.clone();
    out.add_scaled(direction.sign() * learning_rate, grads);
    if !out.all_finite() {
        return Err(Error::Training("update produced non-finite parameters".into()));
    }
    Ok(out)
}
