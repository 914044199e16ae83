//! Fully connected networks with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seeding::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Identity,
    /// `(tanh(x) + 1) / 2`, range `(0, 1)`.
    HalfTanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
            Activation::HalfTanh => 0.5 * (x.tanh() + 1.0),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            // y = (t + 1)/2  =>  dy/dx = (1 - t^2)/2 = 2 y (1 - y)
            Activation::HalfTanh => 2.0 * y * (1.0 - y),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
            Activation::HalfTanh => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            2 => Some(Activation::HalfTanh),
            _ => None,
        }
    }
}

/// `y = act(W x + b)` with `W` stored `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.raw_dim())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| v.is_finite()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Activations kept from a batched forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Input to each layer, `batch x in`, followed by the network output.
    values: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.values.last().expect("trace holds the input")
    }
}

impl DenseNet {
    /// Layer widths `sizes[0] -> sizes[1] -> ...`, hidden layers with
    /// `hidden`, last layer with `output`, parameters uniform in
    /// `+-1/sqrt(fan_in)`.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(sizes, hidden, output);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            layer.weights.mapv_inplace(|_| rng.random_range(-bound..=bound));
            layer.bias.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        net
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(sizes.len() >= 2, "a network needs input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| Layer {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
                activation: if k == last { output } else { hidden },
            })
            .collect();
        Self { layers }
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_len())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_len() {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.input_len(),
                got,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_input(x.len())?;
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = l.weights.dot(&h);
            z += &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            h = z;
        }
        Ok(h)
    }

    /// Batched forward pass over the rows of `x`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = h.dot(&l.weights.t());
            z += &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            h = z;
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<Trace> {
        self.check_input(x.ncols())?;
        let mut values = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let mut z = values.last().unwrap().dot(&l.weights.t());
            z += &l.bias;
            let y = z.mapv(|v| l.activation.apply(v));
            pre.push(z);
            values.push(y);
        }
        Ok(Trace { values, pre })
    }

    /// Backpropagates `grad_out` (`batch x out`, the loss gradient with
    /// respect to the outputs). Returns the summed parameter gradients
    /// (when `params` is set) and the gradient with respect to the inputs.
    pub fn backward(&self, trace: &Trace, grad_out: ArrayView2<f64>, params: bool) -> (Option<Gradients>, Array2<f64>) {
        let mut grads = params.then(|| Vec::with_capacity(self.layers.len()));
        let mut g = grad_out.to_owned();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre[k];
            let y = &trace.values[k + 1];
            ndarray::Zip::from(&mut g)
                .and(z)
                .and(y)
                .for_each(|g, &z, &y| *g *= l.activation.derivative(z, y));
            if let Some(grads) = grads.as_mut() {
                let gw = g.t().dot(&trace.values[k]);
                let gb = g.sum_axis(Axis(0));
                grads.push((gw, gb));
            }
            g = g.dot(&l.weights);
        }
        let grads = grads.map(|mut v| {
            v.reverse();
            Gradients { layers: v }
        });
        (grads, g)
    }

    /// `theta <- theta - step * grad`.
    pub fn descend(&mut self, grads: &Gradients, step: f64) {
        for (l, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.scaled_add(-step, gw);
            l.bias.scaled_add(-step, gb);
        }
    }

    /// `self <- omega * source + (1 - omega) * self`, parameter-wise.
    pub fn blend_from(&mut self, source: &DenseNet, omega: f64) {
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            ndarray::Zip::from(&mut t.weights)
                .and(&s.weights)
                .for_each(|t, &s| *t = omega * s + (1.0 - omega) * *t);
            ndarray::Zip::from(&mut t.bias)
                .and(&s.bias)
                .for_each(|t, &s| *t = omega * s + (1.0 - omega) * *t);
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters layer by layer, weights row-major then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: self.num_params(),
                got: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &DenseNet) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.dim() == b.weights.dim() && a.activation == b.activation
            })
    }
}
