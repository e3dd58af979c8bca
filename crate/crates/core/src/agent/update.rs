use ndarray::Array2;

use super::policy::{Actor, Critic, LOG_STD_MAX, LOG_STD_MIN};
use crate::nn::Optimizer;
use crate::sim::Action;

/// One-step advantage `R + γ V' − V`.
pub fn advantage(reward: f64, gamma: f64, v: f64, v_next: f64) -> f64 {
    reward + gamma * v_next - v
}

/// Zero mean, unit variance; the standard deviation is floored at `1e-8`
/// and a single sample maps to zero.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    if adv.is_empty() {
        return Vec::new();
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-8);
    adv.iter().map(|a| (a - mean) / sd).collect()
}

/// Loss `−(1/B) Σ_b log π(a_b | r_b) A_b` with its parameter gradients and
/// the gradient with respect to the representations.
///
/// `mean_penalty` adds `(β/2B) Σ_b ‖μ_b‖²` on the pre-squash mean. Without
/// it a mean that drifts deep into the tanh tail produces identical actions
/// for every sample and the policy gradient loses all signal.
pub fn actor_loss_grad(
    actor: &Actor,
    reps: &Array2<f64>,
    actions: &[Action],
    advantages: &[f64],
    noise_scale: f64,
    mean_penalty: f64,
) -> (f64, Actor, Array2<f64>) {
    let b = reps.nrows();
    assert!(actions.len() == b && advantages.len() == b, "one action and advantage per representation");
    let (mu, cache) = actor.forward(reps);
    let sd = actor.std(noise_scale);
    let inv_b = 1.0 / b as f64;
    let mut grads = actor.zeros_like();
    let mut d_mu = Array2::zeros(mu.raw_dim());
    let mut loss = 0.0;
    for k in 0..b {
        let m = [mu[[k, 0]], mu[[k, 1]]];
        let lp = actor.log_prob_at(m, &actions[k], noise_scale);
        loss -= inv_b * lp * advantages[k];
        let u = actor.scale.unsquash(&actions[k]);
        for d in 0..2 {
            let z = (u[d] - m[d]) / sd[d];
            d_mu[[k, d]] = -inv_b * advantages[k] * z / sd[d] + inv_b * mean_penalty * m[d];
            loss += 0.5 * inv_b * mean_penalty * m[d] * m[d];
            grads.log_std[d] -= inv_b * advantages[k] * (z * z - 1.0);
        }
    }
    for d in 0..2 {
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&actor.log_std[d]) {
            grads.log_std[d] = 0.0;
        }
    }
    let d_reps = actor.mlp.backward(&cache, &d_mu, &mut grads.mlp);
    (loss, grads, d_reps)
}

/// Mean squared TD error `(1/B) Σ (y_b − V(r_b))²` against fixed targets.
pub fn critic_loss_grad(critic: &Critic, reps: &Array2<f64>, targets: &[f64]) -> (f64, Critic, Array2<f64>) {
    let b = reps.nrows();
    assert_eq!(targets.len(), b, "one target per representation");
    let (v, cache) = critic.mlp.forward(reps);
    let inv_b = 1.0 / b as f64;
    let mut d_v = Array2::zeros(v.raw_dim());
    let mut loss = 0.0;
    for k in 0..b {
        let err = targets[k] - v[[k, 0]];
        loss += inv_b * err * err;
        d_v[[k, 0]] = -2.0 * inv_b * err;
    }
    let mut grads = critic.zeros_like();
    let d_reps = critic.mlp.backward(&cache, &d_v, &mut grads.mlp);
    (loss, grads, d_reps)
}

/// One policy-gradient step. Returns the loss before the step and the
/// gradient that flows back into the representations.
pub fn actor_update(
    actor: &mut Actor,
    opt: &mut Optimizer,
    reps: &Array2<f64>,
    actions: &[Action],
    advantages: &[f64],
    noise_scale: f64,
    mean_penalty: f64,
) -> (f64, Array2<f64>) {
    let (loss, grads, d_reps) = actor_loss_grad(actor, reps, actions, advantages, noise_scale, mean_penalty);
    opt.descend(actor, &grads);
    (loss, d_reps)
}

/// One TD-regression step on the critic.
pub fn critic_update(critic: &mut Critic, opt: &mut Optimizer, reps: &Array2<f64>, targets: &[f64]) -> (f64, Array2<f64>) {
    let (loss, grads, d_reps) = critic_loss_grad(critic, reps, targets);
    opt.descend(critic, &grads);
    (loss, d_reps)
}
