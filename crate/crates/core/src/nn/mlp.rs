use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::glorot_scaled;
use super::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    pub fn derivative(self, z: f64, y: f64) -> f64 {
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
}

/// Fully connected network; hidden layers use `activation`, the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// `out x in` per layer.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub activation: Activation,
    names: Vec<(String, String)>,
}

/// Activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer, `B x in_l`.
    inputs: Vec<Array2<f64>>,
    /// Post-activation of every hidden layer.
    hidden: Vec<Array2<f64>>,
    /// Pre-activation of every hidden layer.
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`. The output layer is initialised with
    /// `output_gain` times the Glorot bound.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let layers = sizes.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let gain = if l + 1 == layers { output_gain } else { 1.0 };
            weights.push(glorot_scaled(sizes[l + 1], sizes[l], gain, rng));
            biases.push(Array1::zeros(sizes[l + 1]));
        }
        let names = (0..layers).map(|l| (format!("w{l}"), format!("b{l}"))).collect();
        Mlp {
            weights,
            biases,
            activation,
            names,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().nrows()
    }

    pub fn zeros_like(&self) -> Mlp {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    /// Batched forward, `x` is `B x in`.
    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        let layers = self.weights.len();
        let mut inputs = Vec::with_capacity(layers);
        let mut hidden = Vec::with_capacity(layers - 1);
        let mut pre = Vec::with_capacity(layers - 1);
        let mut a = x.clone();
        for l in 0..layers {
            let mut z = a.dot(&self.weights[l].t());
            z += &self.biases[l];
            inputs.push(a);
            if l + 1 == layers {
                return (z, MlpCache { inputs, hidden, pre });
            }
            let act = self.activation;
            let y = z.mapv(|v| act.apply(v));
            pre.push(z);
            hidden.push(y.clone());
            a = y;
        }
        unreachable!()
    }

    /// Single-sample forward without a cache.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut a = Array1::from(x.to_vec());
        let layers = self.weights.len();
        for l in 0..layers {
            let mut z = self.weights[l].dot(&a);
            z += &self.biases[l];
            a = if l + 1 == layers {
                z
            } else {
                let act = self.activation;
                z.mapv(|v| act.apply(v))
            };
        }
        a.to_vec()
    }

    /// Accumulate parameter gradients for upstream `dy` (`B x out`) into
    /// `grads`; returns the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, dy: &Array2<f64>, grads: &mut Mlp) -> Array2<f64> {
        let layers = self.weights.len();
        let mut delta = dy.clone();
        for l in (0..layers).rev() {
            grads.weights[l] += &delta.t().dot(&cache.inputs[l]);
            grads.biases[l] += &delta.sum_axis(Axis(0));
            let da = delta.dot(&self.weights[l]);
            if l == 0 {
                return da;
            }
            let act = self.activation;
            let z = &cache.pre[l - 1];
            let y = &cache.hidden[l - 1];
            let mut d = da;
            ndarray::Zip::from(&mut d)
                .and(z)
                .and(y)
                .for_each(|d, &z, &y| *d *= act.derivative(z, y));
            delta = d;
        }
        unreachable!()
    }
}

impl Params for Mlp {
    fn for_each(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            f(&self.names[l].0, w.shape(), w.as_slice().expect("standard layout"));
            f(&self.names[l].1, b.shape(), b.as_slice().expect("standard layout"));
        }
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        for (l, (w, b)) in self.weights.iter_mut().zip(self.biases.iter_mut()).enumerate() {
            let shape = w.shape().to_vec();
            f(&self.names[l].0, &shape, w.as_slice_mut().expect("standard layout"));
            let shape = b.shape().to_vec();
            f(&self.names[l].1, &shape, b.as_slice_mut().expect("standard layout"));
        }
    }
}
