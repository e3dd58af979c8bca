use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{Activation, Mlp, MlpCache, Params};
use crate::sim::{action_box, Action, BuildingConfig};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;
/// Squashed coordinates are kept this far inside `(-1, 1)` before `atanh`.
pub const SQUASH_EPS: f64 = 1e-6;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Affine map between `[-1, 1]^2` and a building's device box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionScale {
    pub center: [f64; 2],
    pub half: [f64; 2],
}

impl ActionScale {
    pub fn for_config(config: &BuildingConfig) -> Self {
        let (lo, hi) = action_box(config);
        ActionScale {
            center: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
            half: [0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])],
        }
    }

    pub fn squash(&self, u: [f64; 2]) -> Action {
        Action::new(self.center[0] + self.half[0] * u[0].tanh(), self.center[1] + self.half[1] * u[1].tanh())
    }

    /// Pre-squash coordinates of `a`, clipped just inside the box.
    pub fn unsquash(&self, a: &Action) -> [f64; 2] {
        let v = a.to_array();
        let mut u = [0.0; 2];
        for d in 0..2 {
            let y = ((v[d] - self.center[d]) / self.half[d]).clamp(-1.0 + SQUASH_EPS, 1.0 - SQUASH_EPS);
            u[d] = y.atanh();
        }
        u
    }

    /// `log |d a / d u|` at pre-squash point `u`.
    pub fn log_jacobian(&self, u: [f64; 2]) -> f64 {
        (0..2).map(|d| (self.half[d] * (1.0 - u[d].tanh().powi(2))).ln()).sum()
    }
}

/// Gaussian policy in pre-squash space: an MLP mean plus a
/// state-independent log standard deviation per action dimension. The
/// effective standard deviation is `exp(log_std) * noise_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub mlp: Mlp,
    pub log_std: Array1<f64>,
    pub scale: ActionScale,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        config: &BuildingConfig,
        log_std_init: f64,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2);
        Actor {
            mlp: Mlp::new(&sizes, Activation::Relu, 0.1, rng),
            log_std: Array1::from_elem(2, log_std_init.clamp(LOG_STD_MIN, LOG_STD_MAX)),
            scale: ActionScale::for_config(config),
        }
    }

    pub fn zeros_like(&self) -> Actor {
        let mut g = self.clone();
        g.fill(0.0);
        g
    }

    pub fn std(&self, noise_scale: f64) -> [f64; 2] {
        let s = |d: usize| self.log_std[d].clamp(LOG_STD_MIN, LOG_STD_MAX).exp() * noise_scale;
        [s(0), s(1)]
    }

    pub fn mean_latent(&self, r: &[f64]) -> [f64; 2] {
        let m = self.mlp.predict(r);
        [m[0], m[1]]
    }

    pub fn mean_action(&self, r: &[f64]) -> Action {
        self.scale.squash(self.mean_latent(r))
    }

    /// Draw an action; `noise_scale = 0` returns the squashed mean.
    pub fn sample<R: Rng + ?Sized>(&self, r: &[f64], noise_scale: f64, rng: &mut R) -> Action {
        let mu = self.mean_latent(r);
        let sd = self.std(noise_scale);
        let mut u = mu;
        for d in 0..2 {
            let eps: f64 = rng.sample(StandardNormal);
            u[d] += sd[d] * eps;
        }
        self.scale.squash(u)
    }

    /// Log-density of `a` under the squashed Gaussian with mean latent `mu`.
    pub fn log_prob_at(&self, mu: [f64; 2], a: &Action, noise_scale: f64) -> f64 {
        let u = self.scale.unsquash(a);
        let sd = self.std(noise_scale);
        let mut lp = -self.scale.log_jacobian(u);
        for d in 0..2 {
            let z = (u[d] - mu[d]) / sd[d];
            lp += -0.5 * z * z - sd[d].ln() - 0.5 * LN_2PI;
        }
        lp
    }

    pub fn log_prob(&self, r: &[f64], a: &Action, noise_scale: f64) -> f64 {
        self.log_prob_at(self.mean_latent(r), a, noise_scale)
    }

    pub fn forward(&self, reps: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        self.mlp.forward(reps)
    }
}

impl Params for Actor {
    fn for_each(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.mlp.for_each(f);
        f("log_std", self.log_std.shape(), self.log_std.as_slice().unwrap());
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.mlp.for_each_mut(f);
        let shape = self.log_std.shape().to_vec();
        f("log_std", &shape, self.log_std.as_slice_mut().unwrap());
    }
}

/// Per-building state-value network.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub mlp: Mlp,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Critic { mlp: Mlp::new(&sizes, Activation::Relu, 1.0, rng) }
    }

    pub fn zeros_like(&self) -> Critic {
        Critic { mlp: self.mlp.zeros_like() }
    }

    pub fn value(&self, r: &[f64]) -> f64 {
        self.mlp.predict(r)[0]
    }
}

impl Params for Critic {
    fn for_each(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.mlp.for_each(f);
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.mlp.for_each_mut(f);
    }
}
