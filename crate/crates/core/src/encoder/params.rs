use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{glorot, Activation, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub gcn_layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub output_dim: usize,
    /// Temporal window `T`; attention spans `T + 1` steps.
    pub window: usize,
    pub activation: Activation,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            input_dim: crate::features::FEATURE_DIM,
            gcn_layers: 3,
            hidden: 64,
            heads: 4,
            head_dim: 32,
            output_dim: 64,
            window: 24,
            activation: Activation::Relu,
        }
    }
}

impl EncoderConfig {
    pub fn attn_dim(&self) -> usize {
        self.heads * self.head_dim
    }

    pub fn validate(&self) -> Result<(), super::EncoderError> {
        let dims = [
            ("input_dim", self.input_dim),
            ("gcn_layers", self.gcn_layers),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("head_dim", self.head_dim),
            ("output_dim", self.output_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(super::EncoderError::Shape(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Every learnable tensor of the encoder. Matrices are stored `out x in`.
///
/// The same type doubles as its gradient buffer ([`ParamGrads`]).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    /// `W^(l)`: `hidden x input_dim`, then `hidden x hidden`.
    pub gcn: Vec<Array2<f64>>,
    /// Per head `head_dim x input_dim`.
    pub wq: Vec<Array2<f64>>,
    pub wk: Vec<Array2<f64>>,
    pub wv: Vec<Array2<f64>>,
    /// Head output projection, `attn_dim x attn_dim`.
    pub wo: Array2<f64>,
    /// `W_s`: `output_dim x hidden`.
    pub ws: Array2<f64>,
    /// `W_t`: `output_dim x attn_dim`.
    pub wt: Array2<f64>,
    pub b: Array1<f64>,
    names: Names,
}

/// Gradient buffers mirror the parameter layout exactly.
pub type ParamGrads = EncoderParams;

#[derive(Debug, Clone, PartialEq)]
struct Names {
    gcn: Vec<String>,
    wq: Vec<String>,
    wk: Vec<String>,
    wv: Vec<String>,
}

impl Names {
    fn new(cfg: &EncoderConfig) -> Self {
        Names {
            gcn: (0..cfg.gcn_layers).map(|l| format!("gcn.{l}")).collect(),
            wq: (0..cfg.heads).map(|h| format!("attn.q.{h}")).collect(),
            wk: (0..cfg.heads).map(|h| format!("attn.k.{h}")).collect(),
            wv: (0..cfg.heads).map(|h| format!("attn.v.{h}")).collect(),
        }
    }
}

impl EncoderParams {
    pub fn new<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Self {
        let mut gcn = Vec::with_capacity(config.gcn_layers);
        for l in 0..config.gcn_layers {
            let fan_in = if l == 0 { config.input_dim } else { config.hidden };
            gcn.push(glorot(config.hidden, fan_in, rng));
        }
        let head = |rng: &mut R| -> Vec<Array2<f64>> {
            (0..config.heads).map(|_| glorot(config.head_dim, config.input_dim, rng)).collect()
        };
        let wq = head(rng);
        let wk = head(rng);
        let wv = head(rng);
        let a = config.attn_dim();
        let wo = glorot(a, a, rng);
        let ws = glorot(config.output_dim, config.hidden, rng);
        let wt = glorot(config.output_dim, a, rng);
        let b = Array1::zeros(config.output_dim);
        let names = Names::new(&config);
        EncoderParams { config, gcn, wq, wk, wv, wo, ws, wt, b, names }
    }

    pub fn zeros(config: EncoderConfig) -> Self {
        let mut p = Self::new(config, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0));
        p.fill(0.0);
        p
    }

    pub fn zeros_like(&self) -> ParamGrads {
        let mut g = self.clone();
        g.fill(0.0);
        g
    }
}

impl Params for EncoderParams {
    fn for_each(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        let mut emit = |name: &str, shape: &[usize], data: &[f64]| f(name, shape, data);
        for (w, n) in self.gcn.iter().zip(&self.names.gcn) {
            emit(n, w.shape(), w.as_slice().unwrap());
        }
        for (group, names) in [(&self.wq, &self.names.wq), (&self.wk, &self.names.wk), (&self.wv, &self.names.wv)] {
            for (w, n) in group.iter().zip(names) {
                emit(n, w.shape(), w.as_slice().unwrap());
            }
        }
        emit("attn.out", self.wo.shape(), self.wo.as_slice().unwrap());
        emit("fuse.s", self.ws.shape(), self.ws.as_slice().unwrap());
        emit("fuse.t", self.wt.shape(), self.wt.as_slice().unwrap());
        emit("fuse.b", self.b.shape(), self.b.as_slice().unwrap());
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        fn go(f: &mut dyn FnMut(&str, &[usize], &mut [f64]), name: &str, w: &mut Array2<f64>) {
            let shape = w.shape().to_vec();
            f(name, &shape, w.as_slice_mut().unwrap());
        }
        for (w, n) in self.gcn.iter_mut().zip(&self.names.gcn) {
            go(f, n, w);
        }
        for (w, n) in self.wq.iter_mut().zip(&self.names.wq) {
            go(f, n, w);
        }
        for (w, n) in self.wk.iter_mut().zip(&self.names.wk) {
            go(f, n, w);
        }
        for (w, n) in self.wv.iter_mut().zip(&self.names.wv) {
            go(f, n, w);
        }
        go(f, "attn.out", &mut self.wo);
        go(f, "fuse.s", &mut self.ws);
        go(f, "fuse.t", &mut self.wt);
        let shape = self.b.shape().to_vec();
        f("fuse.b", &shape, self.b.as_slice_mut().unwrap());
    }
}
