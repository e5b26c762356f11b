//! Small fully-connected networks with exact backpropagation, Adam and checkpoints.
//!
//! Batches are row-major: one sample per row.

mod adam;
mod checkpoint;
mod gradcheck;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_net, write_net, CheckpointReader, CheckpointWriter, NET_FORMAT_VERSION};
pub use gradcheck::{gradient_check, GradcheckReport};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input has {got} features, network expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("upstream gradient has shape {got:?}, expected {expected:?}")]
    GradientShape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("network topologies differ")]
    TopologyMismatch,
    #[error("trace was recorded by a network of a different topology")]
    TraceMismatch,
    #[error("tau {0} outside [0, 1]")]
    InvalidTau(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn n_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
    /// Multiplies the final activation (`a_M` for the actor, 1 for critics).
    pub output_scale: f64,
}

/// Per-layer values recorded by [`DenseNet::forward_trace`] for one batch.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Trace {
    /// Scaled network output, `batch x out`.
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// Pre-activations of layer `i`, `batch x out_i`.
    pub fn pre_activation(&self, i: usize) -> &Array2<f64> {
        &self.pre[i]
    }
}

/// Parameter-shaped container for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dw: Vec<Array2<f64>>,
    pub db: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            dw: net.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            db: net.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        }
    }

    /// Flattened in the same order as [`DenseNet::params`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.dw.iter().zip(&self.db) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }

    pub fn scale(&mut self, k: f64) {
        for w in &mut self.dw {
            *w *= k;
        }
        for b in &mut self.db {
            *b *= k;
        }
    }
}

impl DenseNet {
    /// Fully-connected net over `sizes` (`[in, h1, .., out]`), uniform fan-in initialisation.
    pub fn new(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        output_scale: f64,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Layer {
                    w: Array2::from_shape_fn((fan_out, fan_in), |_| dist.sample(rng)),
                    b: Array1::from_shape_fn(fan_out, |_| dist.sample(rng)),
                    activation: if i + 1 == n { output } else { hidden },
                }
            })
            .collect();
        Self { layers, output_scale }
    }

    /// Actor: `state_dim -> hidden.. -> m`, relu hidden, `a_M * tanh` output,
    /// final layer shrunk tenfold so initial actions sit near zero.
    pub fn actor(state_dim: usize, hidden: &[usize], m: usize, action_limit: f64, rng: &mut impl Rng) -> Self {
        let sizes: Vec<usize> = std::iter::once(state_dim).chain(hidden.iter().copied()).chain([m]).collect();
        let mut net = Self::new(&sizes, Activation::Relu, Activation::Tanh, action_limit, rng);
        let last = net.layers.last_mut().expect("non-empty");
        last.w *= 0.1;
        last.b *= 0.1;
        net
    }

    /// Critic: `state_dim + m -> hidden.. -> 1`, relu hidden, identity output.
    pub fn critic(state_dim: usize, hidden: &[usize], m: usize, rng: &mut impl Rng) -> Self {
        let sizes: Vec<usize> = std::iter::once(state_dim + m)
            .chain(hidden.iter().copied())
            .chain([1])
            .collect();
        Self::new(&sizes, Activation::Relu, Activation::Identity, 1.0, rng)
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    /// `[in, h1, .., out]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.n_inputs())
            .chain(self.layers.iter().map(Layer::n_out))
            .collect()
    }

    pub fn same_topology(&self, other: &DenseNet) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.w.dim() == b.w.dim() && a.activation == b.activation)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters flattened layer by layer, weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend(l.w.iter());
            v.extend(l.b.iter());
        }
        v
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.n_params() {
            return Err(NnError::Dimension {
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|p| *p = *it.next().expect("length checked"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<(), NnError> {
        if cols != self.n_inputs() {
            return Err(NnError::Dimension {
                expected: self.n_inputs(),
                got: cols,
            });
        }
        Ok(())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous slice");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.w.t());
            z += &l.b;
            z.mapv_inplace(|v| l.activation.apply(v));
            a = z;
        }
        if self.output_scale != 1.0 {
            a *= self.output_scale;
        }
        Ok(a)
    }

    /// Forward pass recording what [`DenseNet::backward`] needs.
    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<Trace, NnError> {
        self.check_input(x.ncols())?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut post = Vec::with_capacity(n);
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.w.t());
            z += &l.b;
            let y = z.mapv(|v| l.activation.apply(v));
            inputs.push(a);
            pre.push(z);
            a = y.clone();
            post.push(y);
        }
        let output = if self.output_scale != 1.0 { a * self.output_scale } else { a };
        Ok(Trace {
            inputs,
            pre,
            post,
            output,
        })
    }

    /// Reverse-mode gradients of `sum(upstream * output)` with respect to every
    /// parameter (summed over the batch) and to the input batch.
    pub fn backward(&self, trace: &Trace, upstream: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>), NnError> {
        if trace.pre.len() != self.layers.len()
            || trace.pre.iter().zip(&self.layers).any(|(z, l)| z.ncols() != l.n_out())
            || trace.inputs.first().is_none_or(|x| x.ncols() != self.n_inputs())
        {
            return Err(NnError::TraceMismatch);
        }
        if upstream.dim() != trace.output.dim() {
            return Err(NnError::GradientShape {
                expected: trace.output.dim(),
                got: upstream.dim(),
            });
        }
        let n = self.layers.len();
        let mut dw = Vec::with_capacity(n);
        let mut db = Vec::with_capacity(n);
        let mut delta = &upstream * self.output_scale;
        for i in (0..n).rev() {
            let l = &self.layers[i];
            let z = &trace.pre[i];
            let y = &trace.post[i];
            ndarray::Zip::from(&mut delta)
                .and(z)
                .and(y)
                .for_each(|d, &z, &y| *d *= l.activation.derivative(z, y));
            dw.push(delta.t().dot(&trace.inputs[i]));
            db.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&l.w);
        }
        dw.reverse();
        db.reverse();
        Ok((Gradients { dw, db }, delta))
    }

    /// `target <- tau * online + (1 - tau) * target`, parameter by parameter.
    pub fn soft_update(&mut self, online: &DenseNet, tau: f64) -> Result<(), NnError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(NnError::InvalidTau(tau));
        }
        if !self.same_topology(online) || self.output_scale != online.output_scale {
            return Err(NnError::TopologyMismatch);
        }
        if tau == 1.0 {
            self.layers.clone_from(&online.layers);
            return Ok(());
        }
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.w.zip_mut_with(&o.w, |a, &b| *a = tau * b + (1.0 - tau) * *a);
            t.b.zip_mut_with(&o.b, |a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
        Ok(())
    }
}
