//! Dense feed-forward networks with hand-derived backpropagation.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`. A forward pass
//! returns a [`Tape`] holding every layer input and pre-activation, which is
//! all [`Mlp::backward`] needs.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if pre > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(pre);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Activation::LeakyRelu(slope) if !(slope > 0.0 && slope.is_finite()) => Err(
                Error::InvalidConfig(format!("leaky-relu slope must be > 0, got {slope}")),
            ),
            _ => Ok(()),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    in_dim: usize,
    out_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Dense {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig("layer dimensions must be >= 1".into()));
        }
        if weight.len() != in_dim * out_dim {
            return Err(Error::ShapeMismatch(format!(
                "weight has {} entries, expected {out_dim}x{in_dim}",
                weight.len()
            )));
        }
        if bias.len() != out_dim {
            return Err(Error::ShapeMismatch(format!(
                "bias has {} entries, expected {out_dim}",
                bias.len()
            )));
        }
        activation.validate()?;
        Ok(Self {
            in_dim,
            out_dim,
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        Self::new(
            in_dim,
            out_dim,
            vec![0.0; in_dim * out_dim],
            vec![0.0; out_dim],
            activation,
        )
    }

    /// Xavier-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = Self::zeros(in_dim, out_dim, activation)?;
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        layer.weight.iter_mut().for_each(|w| *w = dist.sample(rng));
        Ok(layer)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight_mut(&mut self) -> &mut [f64] {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    #[inline]
    fn pre_activation(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weight.chunks_exact(self.in_dim).zip(&self.bias))
        {
            let mut acc = *b;
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            *o = acc;
        }
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `inputs[l]` is the input fed to layer `l`.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn input(&self) -> &[f64] {
        match self.inputs.first() {
            Some(x) => x,
            None => &self.output,
        }
    }
}

/// A stack of dense layers. An empty stack is the identity map on `input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    layers: Vec<Dense>,
}

impl Mlp {
    pub fn from_layers(input_dim: usize, layers: Vec<Dense>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidConfig("network input dimension must be >= 1".into()));
        }
        let mut dim = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim != dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} expects input {} but previous width is {dim}",
                    layer.in_dim
                )));
            }
            dim = layer.out_dim;
        }
        Ok(Self { input_dim, layers })
    }

    /// Randomly initialised network; `widths` lists `(out_dim, activation)` per layer.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        widths: &[(usize, Activation)],
        rng: &mut R,
    ) -> Result<Self> {
        let mut dim = input_dim;
        let mut layers = Vec::with_capacity(widths.len());
        for &(out, act) in widths {
            layers.push(Dense::init(dim, out, act, rng)?);
            dim = out;
        }
        Self::from_layers(input_dim, layers)
    }

    pub fn zeros(input_dim: usize, widths: &[(usize, Activation)]) -> Result<Self> {
        let mut dim = input_dim;
        let mut layers = Vec::with_capacity(widths.len());
        for &(out, act) in widths {
            layers.push(Dense::zeros(dim, out, act)?);
            dim = out;
        }
        Self::from_layers(input_dim, layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.out_dim)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            let mut z = vec![0.0; layer.out_dim];
            layer.pre_activation(&current, &mut z);
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut current, a));
            pre.push(z);
        }
        let tape = Tape {
            inputs,
            pre,
            output: current.clone(),
        };
        Ok((current, tape))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        for layer in &self.layers {
            let mut z = vec![0.0; layer.out_dim];
            layer.pre_activation(&current, &mut z);
            z.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            current = z;
        }
        Ok(current)
    }

    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let mut grads = MlpGrads::zeros_like(self);
        let input_grad = self.backward_into(tape, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward_into(
        &self,
        tape: &Tape,
        output_grad: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec<f64>> {
        self.check_tape(tape)?;
        if grads.weights.len() != self.layers.len() {
            return Err(Error::ShapeMismatch("gradient buffer layer count".into()));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp output gradient",
                expected: self.output_dim(),
                found: output_grad.len(),
            });
        }
        let mut upstream = output_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &tape.inputs[l];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(&tape.pre[l])
                .map(|(g, &z)| g * layer.activation.derivative(z))
                .collect();
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            let mut down = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                gb[o] += d;
                let row = o * layer.in_dim;
                let wrow = &layer.weight[row..row + layer.in_dim];
                let grow = &mut gw[row..row + layer.in_dim];
                for i in 0..layer.in_dim {
                    grow[i] += d * x[i];
                    down[i] += d * wrow[i];
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// Input gradient only; parameter gradients are not formed.
    pub fn backward_input(&self, tape: &Tape, output_grad: &[f64]) -> Result<Vec<f64>> {
        self.check_tape(tape)?;
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp output gradient",
                expected: self.output_dim(),
                found: output_grad.len(),
            });
        }
        let mut upstream = output_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let mut down = vec![0.0; layer.in_dim];
            for (o, (g, &z)) in upstream.iter().zip(&tape.pre[l]).enumerate() {
                let d = g * layer.activation.derivative(z);
                let wrow = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (acc, w) in down.iter_mut().zip(wrow) {
                    *acc += d * w;
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "mlp input",
                expected: self.input_dim,
                found: input.len(),
            });
        }
        Ok(())
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        if tape.pre.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "tape has {} layers, network has {}",
                tape.pre.len(),
                self.layers.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if tape.inputs[l].len() != layer.in_dim || tape.pre[l].len() != layer.out_dim {
                return Err(Error::ShapeMismatch(format!("tape layer {l} shape")));
            }
        }
        Ok(())
    }
}

/// Parameter gradients shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.layers.iter().map(|l| vec![0.0; l.weight.len()]).collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

/// Flat view over the tensors of a parameter (or gradient) container.
///
/// Two containers of the same architecture yield tensors of identical lengths
/// in identical order.
pub trait Params {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

impl Params for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

impl Params for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl Params for MlpGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }
}
