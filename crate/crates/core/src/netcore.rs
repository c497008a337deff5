//! Minimal dense feed-forward network engine.
//!
//! Parameters live in one flat `Vec<f64>`; layer `l` owns a row-major
//! `(fan_out, fan_in)` weight block followed by its `fan_out` biases.
//! Hidden layers apply the configured activation, the output layer is a raw
//! score.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rewards::{sigmoid, sigmoid_reward_slope, Label, RewardKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative given the pre-activation `z` and its image `a`.
    #[inline]
    fn slope(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    /// Widths of every layer; the last entry is the output dimension.
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub init_seed: u64,
    pub init_scale: f64,
}

impl NetworkConfig {
    pub fn new(input_dim: usize, layer_sizes: Vec<usize>) -> Self {
        Self {
            input_dim,
            layer_sizes,
            hidden_activation: Activation::Relu,
            init_seed: 0,
            init_scale: 1.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub fn with_activation(mut self, act: Activation) -> Self {
        self.hidden_activation = act;
        self
    }

    pub fn with_init_scale(mut self, scale: f64) -> Self {
        self.init_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be positive".into()));
        }
        if self.layer_sizes.is_empty() {
            return Err(Error::Config("layer_sizes must not be empty".into()));
        }
        if let Some(i) = self.layer_sizes.iter().position(|&w| w == 0) {
            return Err(Error::Config(format!("layer {i} has width 0")));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(format!(
                "init_scale must be positive, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated config")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerShape {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl LayerShape {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

fn layout(config: &NetworkConfig) -> Vec<LayerShape> {
    let mut shapes = Vec::with_capacity(config.layer_sizes.len());
    let mut fan_in = config.input_dim;
    let mut offset = 0;
    for &fan_out in &config.layer_sizes {
        let s = LayerShape {
            fan_in,
            fan_out,
            offset,
        };
        offset += s.len();
        shapes.push(s);
        fan_in = fan_out;
    }
    shapes
}

/// Anything that maps a feature vector to a real score.
pub trait Scorer {
    fn score(&self, x: &[f64]) -> Result<f64>;

    fn score_all(&self, data: &Dataset) -> Result<Vec<f64>> {
        (0..data.len()).map(|i| self.score(data.row(i))).collect()
    }
}

/// Dense feed-forward network weights together with their configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: NetworkConfig,
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
}

impl Model {
    /// Seeded initialisation: weights uniform in `[-s, s]` with
    /// `s = init_scale / sqrt(fan_in)`, biases zero.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.init_seed);
        for shape in model.shapes.clone() {
            let s = model.config.init_scale / (shape.fan_in as f64).sqrt();
            for w in &mut model.params[shape.weights()] {
                *w = rng.random_range(-s..=s);
            }
        }
        Ok(model)
    }

    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let shapes = layout(&config);
        let n = shapes.iter().map(LayerShape::len).sum();
        Ok(Self {
            config,
            shapes,
            params: vec![0.0; n],
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.shapes.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer_weights(&self, layer: usize) -> &[f64] {
        &self.params[self.shapes[layer].weights()]
    }

    pub fn layer_biases(&self, layer: usize) -> &[f64] {
        &self.params[self.shapes[layer].biases()]
    }

    /// Overwrites the weights (row-major, `fan_out x fan_in`) and biases of one layer.
    pub fn set_layer(&mut self, layer: usize, weights: &[f64], biases: &[f64]) -> Result<()> {
        let shape = *self.shapes.get(layer).ok_or_else(|| {
            Error::Config(format!("layer {layer} out of range ({})", self.shapes.len()))
        })?;
        check_len(shape.fan_in * shape.fan_out, weights.len())?;
        check_len(shape.fan_out, biases.len())?;
        self.params[shape.weights()].copy_from_slice(weights);
        self.params[shape.biases()].copy_from_slice(biases);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|w| w.is_finite())
    }

    /// Raw outputs of the last layer.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim(), x.len())?;
        let mut cur = x.to_vec();
        let last = self.shapes.len() - 1;
        for (l, shape) in self.shapes.iter().enumerate() {
            let mut next = self.affine(shape, &cur);
            if l < last {
                let act = self.config.hidden_activation;
                next.iter_mut().for_each(|z| *z = act.apply(*z));
            }
            cur = next;
        }
        Ok(cur)
    }

    fn affine(&self, shape: &LayerShape, input: &[f64]) -> Vec<f64> {
        let w = &self.params[shape.weights()];
        let b = &self.params[shape.biases()];
        (0..shape.fan_out)
            .map(|o| {
                let row = &w[o * shape.fan_in..(o + 1) * shape.fan_in];
                row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>() + b[o]
            })
            .collect()
    }

    /// Forward pass keeping every layer's pre-activation and output.
    fn forward_cached(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let last = self.shapes.len() - 1;
        let mut pre = Vec::with_capacity(self.shapes.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.shapes.len() + 1);
        post.push(x.to_vec());
        for (l, shape) in self.shapes.iter().enumerate() {
            let z = self.affine(shape, &post[l]);
            let a = if l < last {
                let act = self.config.hidden_activation;
                z.iter().map(|&v| act.apply(v)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            post.push(a);
        }
        (pre, post)
    }

    /// Adds `sum_k upstream[k] * d out_k / d w` to `grad`.
    pub fn accumulate_gradient(
        &self,
        x: &[f64],
        upstream: &[f64],
        grad: &mut GradientBuffer,
    ) -> Result<()> {
        check_len(self.input_dim(), x.len())?;
        check_len(self.output_dim(), upstream.len())?;
        check_len(self.num_params(), grad.len())?;
        let (pre, post) = self.forward_cached(x);
        let act = self.config.hidden_activation;
        let mut delta = upstream.to_vec();
        for l in (0..self.shapes.len()).rev() {
            let shape = self.shapes[l];
            let input = &post[l];
            let g = &mut grad.values;
            let wr = shape.weights();
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut g[wr.start + o * shape.fan_in..wr.start + (o + 1) * shape.fan_in];
                row.iter_mut().zip(input).for_each(|(gw, a)| *gw += d * a);
            }
            let br = shape.biases();
            g[br].iter_mut().zip(&delta).for_each(|(gb, d)| *gb += d);
            if l > 0 {
                let w = &self.params[shape.weights()];
                let mut prev = vec![0.0; shape.fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[o * shape.fan_in..(o + 1) * shape.fan_in];
                    prev.iter_mut().zip(row).for_each(|(p, wv)| *p += wv * d);
                }
                for (i, p) in prev.iter_mut().enumerate() {
                    *p *= act.slope(pre[l - 1][i], post[l][i]);
                }
                delta = prev;
            }
        }
        Ok(())
    }

    /// Splits after `k` layers into `(lower, upper)`. The lower network's
    /// raw output is the pre-activation of hidden layer `k`; pass it through
    /// [`Model::hidden_activation`] before feeding the upper network.
    pub fn split_at(&self, k: usize) -> Result<(Model, Model)> {
        if k == 0 || k >= self.shapes.len() {
            return Err(Error::Config(format!(
                "split point {k} must lie strictly inside 1..{}",
                self.shapes.len()
            )));
        }
        let mut lower_cfg = self.config.clone();
        lower_cfg.layer_sizes = self.config.layer_sizes[..k].to_vec();
        let mut upper_cfg = self.config.clone();
        upper_cfg.input_dim = self.config.layer_sizes[k - 1];
        upper_cfg.layer_sizes = self.config.layer_sizes[k..].to_vec();
        let cut = self.shapes[k].offset;
        let lower = Model {
            shapes: layout(&lower_cfg),
            config: lower_cfg,
            params: self.params[..cut].to_vec(),
        };
        let upper = Model {
            shapes: layout(&upper_cfg),
            config: upper_cfg,
            params: self.params[cut..].to_vec(),
        };
        Ok((lower, upper))
    }

    pub fn hidden_activation(&self) -> Activation {
        self.config.hidden_activation
    }
}

impl Scorer for Model {
    /// `f(x; w)`, the raw output of a single-output network.
    fn score(&self, x: &[f64]) -> Result<f64> {
        check_len(1, self.output_dim())?;
        Ok(self.forward(x)?[0])
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::Shape { expected, got })
    } else {
        Ok(())
    }
}

/// Gradient with the same flat layout as a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    values: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            values: vec![0.0; model.num_params()],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|g| *g *= c);
    }

    /// `self += c * other`
    pub fn add_scaled(&mut self, other: &GradientBuffer, c: f64) -> Result<()> {
        check_len(self.len(), other.len())?;
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a += c * b);
        Ok(())
    }
}

/// One term `coeff * r(f(x; w), y)` of a weighted reward sum.
#[derive(Debug, Clone, Copy)]
pub struct WeightedPoint<'a> {
    pub x: &'a [f64],
    pub y: Label,
    pub coeff: f64,
}

/// Exact gradient of `sum_i c_i * r(f(x_i; w), y_i)`, reduced in batch order.
pub fn backward_weighted_rewards(
    model: &Model,
    batch: &[WeightedPoint<'_>],
    kind: RewardKind,
) -> Result<GradientBuffer> {
    if kind != RewardKind::Sigmoid {
        return Err(Error::NonDifferentiable(kind.name()));
    }
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut grad = GradientBuffer::zeros_like(model);
    for pt in batch {
        if pt.coeff == 0.0 {
            continue;
        }
        let s = model.score(pt.x)?;
        let up = pt.coeff * sigmoid_reward_slope(s, pt.y);
        model.accumulate_gradient(pt.x, &[up], &mut grad)?;
    }
    if !grad.is_finite() {
        return Err(Error::Numeric {
            iteration: 0,
            what: "weighted reward gradient".into(),
        });
    }
    Ok(grad)
}

/// A differentiable scalar objective of the model weights.
pub trait Objective {
    fn value(&self, model: &Model) -> Result<f64>;
    fn gradient(&self, model: &Model) -> Result<GradientBuffer>;
}

/// Largest `|analytic - central difference| / max(1, |analytic|)` over all
/// coordinates, with perturbation `h`.
pub fn grad_check(model: &Model, objective: &dyn Objective, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("grad_check step must be positive, got {h}")));
    }
    let analytic = objective.gradient(model)?;
    check_len(model.num_params(), analytic.len())?;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for k in 0..model.num_params() {
        let w0 = model.params[k];
        probe.params[k] = w0 + h;
        let up = objective.value(&probe)?;
        probe.params[k] = w0 - h;
        let down = objective.value(&probe)?;
        probe.params[k] = w0;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Numeric {
                iteration: 0,
                what: format!("objective at perturbed coordinate {k}"),
            });
        }
        let fd = (up - down) / (2.0 * h);
        let a = analytic.values[k];
        worst = worst.max((a - fd).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepperKind {
    ConstantSgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl StepperKind {
    pub fn adam() -> Self {
        StepperKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascent,
    Descent,
}

/// Constant-step SGD or bias-corrected ADAM.
#[derive(Debug, Clone)]
pub struct OptStepper {
    kind: StepperKind,
    eta: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    t: u64,
}

impl OptStepper {
    pub fn new(kind: StepperKind, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("step size must be positive, got {eta}")));
        }
        if let StepperKind::Adam {
            beta1,
            beta2,
            epsilon,
        } = kind
        {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
                return Err(Error::Config("invalid ADAM hyperparameters".into()));
            }
        }
        Ok(Self {
            kind,
            eta,
            first: Vec::new(),
            second: Vec::new(),
            t: 0,
        })
    }

    pub fn constant_sgd(eta: f64) -> Result<Self> {
        Self::new(StepperKind::ConstantSgd, eta)
    }

    pub fn adam(eta: f64) -> Result<Self> {
        Self::new(StepperKind::adam(), eta)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, model: &mut Model, grad: &GradientBuffer, dir: Direction) -> Result<()> {
        check_len(model.num_params(), grad.len())?;
        if !grad.is_finite() {
            return Err(Error::Numeric {
                iteration: self.t + 1,
                what: "primal gradient".into(),
            });
        }
        self.t += 1;
        let sign = match dir {
            Direction::Ascent => 1.0,
            Direction::Descent => -1.0,
        };
        match self.kind {
            StepperKind::ConstantSgd => {
                for (w, g) in model.params.iter_mut().zip(grad.as_slice()) {
                    *w += sign * self.eta * g;
                }
            }
            StepperKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                if self.first.len() != grad.len() {
                    self.first = vec![0.0; grad.len()];
                    self.second = vec![0.0; grad.len()];
                }
                let c1 = 1.0 - beta1.powi(self.t as i32);
                let c2 = 1.0 - beta2.powi(self.t as i32);
                for (k, (w, &g)) in model.params.iter_mut().zip(grad.as_slice()).enumerate() {
                    let m = beta1 * self.first[k] + (1.0 - beta1) * g;
                    let v = beta2 * self.second[k] + (1.0 - beta2) * g * g;
                    self.first[k] = m;
                    self.second[k] = v;
                    *w += sign * self.eta * (m / c1) / ((v / c2).sqrt() + epsilon);
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::Numeric {
                iteration: self.t,
                what: "model weights after step".into(),
            });
        }
        Ok(())
    }
}
