use serde::{Deserialize, Serialize};

use super::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Gradient-descent state for one parameter set. Gradients passed to
/// [`Optimizer::descend`] are those of a loss to be minimised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Rescale the full gradient to this global norm when exceeded.
    pub max_grad_norm: Option<f64>,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, max_grad_norm: Option<f64>) -> Self {
        Optimizer {
            kind,
            lr,
            max_grad_norm,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn set_moments(&mut self, m: Vec<f64>, v: Vec<f64>) {
        self.m = m;
        self.v = v;
    }

    pub fn descend<P: Params>(&mut self, params: &mut P, grads: &P) {
        let mut g = grads.flatten();
        if let Some(max) = self.max_grad_norm {
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > max {
                let k = max / norm;
                g.iter_mut().for_each(|x| *x *= k);
            }
        }
        self.step += 1;
        let update: Vec<f64> = match self.kind {
            OptimizerKind::Sgd => g.iter().map(|x| -self.lr * x).collect(),
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.m.len() != g.len() {
                    self.m = vec![0.0; g.len()];
                    self.v = vec![0.0; g.len()];
                }
                let bc1 = 1.0 - beta1.powi(self.step as i32);
                let bc2 = 1.0 - beta2.powi(self.step as i32);
                g.iter()
                    .enumerate()
                    .map(|(k, &gk)| {
                        self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * gk;
                        self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * gk * gk;
                        let mh = self.m[k] / bc1;
                        let vh = self.v[k] / bc2;
                        -self.lr * mh / (vh.sqrt() + eps)
                    })
                    .collect()
            }
        };
        let mut offset = 0;
        params.for_each_mut(&mut |_, _, d| {
            for (p, u) in d.iter_mut().zip(&update[offset..]) {
                *p += u;
            }
            offset += d.len();
        });
    }
}
