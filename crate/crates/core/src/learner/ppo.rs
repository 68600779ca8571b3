//! Clipped-surrogate policy optimisation.

use super::adam::Adam;
use super::buffer::{normalize, RolloutBuffer};
use super::policy::{Policy, TrainScratch};
use super::LearnerError;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub n_steps: usize,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub total_steps: usize,
    pub seed: u64,
    /// Write a checkpoint every this many updates (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            n_steps: 2048,
            batch_size: 64,
            n_epochs: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.0,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            total_steps: 200_000,
            seed: 0,
            checkpoint_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::InvalidConfig(m.to_string()));
        for (v, name) in [
            (self.learning_rate, "learning_rate"),
            (self.gamma, "gamma"),
            (self.gae_lambda, "gae_lambda"),
            (self.clip_range, "clip_range"),
            (self.max_grad_norm, "max_grad_norm"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.gamma > 1.0 || self.gae_lambda > 1.0 {
            return bad("gamma and gae_lambda must not exceed 1");
        }
        if !(self.vf_coef >= 0.0 && self.ent_coef >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if self.n_steps == 0 || self.batch_size == 0 || self.n_epochs == 0 || self.total_steps == 0 {
            return bad("step, batch and epoch counts must be positive");
        }
        if !self.n_steps.is_multiple_of(self.batch_size) {
            return bad("batch_size must divide n_steps");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Clip fraction of the very first minibatch.
    pub first_clip_fraction: f64,
    pub grad_norm: f64,
}

/// Per-minibatch losses and the gradient of their weighted sum.
#[derive(Debug, Clone)]
pub struct MinibatchLoss {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad: Vec<f64>,
}

/// Clipped surrogate plus value loss over `idx`, with advantages taken as
/// given (already normalised).
pub fn minibatch_loss(policy: &Policy, buf: &RolloutBuffer, idx: &[usize], cfg: &TrainConfig) -> MinibatchLoss {
    let b = idx.len() as f64;
    let mut grad = vec![0.0; policy.n_params()];
    let mut scratch = TrainScratch::default();
    let (mut pl, mut vl, mut kl, mut clipped) = (0.0, 0.0, 0.0, 0usize);
    let eps = cfg.clip_range;
    for &i in idx {
        let u = buf.raw_actions[i];
        let (logp, v) = policy.forward_train(&buf.obs[i], u, &mut scratch);
        let log_ratio = logp - buf.log_probs[i];
        let r = log_ratio.exp();
        let a = buf.advantages[i];
        let unclipped = r * a;
        let clip = r.clamp(1.0 - eps, 1.0 + eps) * a;
        pl -= unclipped.min(clip);
        // gradient flows through the unclipped term only when it is the minimum
        let w_logp = if unclipped <= clip { -a * r / b } else { 0.0 };
        let err = v - buf.returns[i];
        vl += err * err;
        let w_value = cfg.vf_coef * 2.0 * err / b;
        policy.backward_train(u, w_logp, w_value, &scratch, &mut grad);
        kl += (r - 1.0) - log_ratio;
        if (r - 1.0).abs() > eps {
            clipped += 1;
        }
    }
    MinibatchLoss {
        policy_loss: pl / b,
        value_loss: vl / b,
        approx_kl: kl / b,
        clip_fraction: clipped as f64 / b,
        grad,
    }
}

/// Scales `g` so its Euclidean norm is at most `max`; returns the norm
/// before scaling.
pub fn clip_grad_norm(g: &mut [f64], max: f64) -> f64 {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max {
        let s = max / (norm + 1e-6);
        g.iter_mut().for_each(|v| *v *= s);
    }
    norm
}

/// Runs `n_epochs` over shuffled minibatches. Advantages are normalised once
/// per update; `compute_gae` must have been called.
pub fn ppo_update(
    policy: &mut Policy,
    adam: &mut Adam,
    buf: &mut RolloutBuffer,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<UpdateMetrics, LearnerError> {
    if buf.advantages.len() != buf.len() || buf.is_empty() {
        return Err(LearnerError::InvalidConfig("buffer has no advantages".into()));
    }
    normalize(&mut buf.advantages);
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut m = UpdateMetrics::default();
    let mut count = 0usize;
    for epoch in 0..cfg.n_epochs {
        order.shuffle(rng);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let mut mb = minibatch_loss(policy, buf, idx, cfg);
            if !(mb.policy_loss.is_finite() && mb.value_loss.is_finite()) || mb.grad.iter().any(|g| !g.is_finite()) {
                return Err(LearnerError::NonFinite {
                    epoch,
                    batch,
                    policy_loss: mb.policy_loss,
                    value_loss: mb.value_loss,
                });
            }
            if count == 0 {
                m.first_clip_fraction = mb.clip_fraction;
            }
            m.grad_norm += clip_grad_norm(&mut mb.grad, cfg.max_grad_norm);
            let mut p = policy.params();
            adam.step(&mut p, &mb.grad);
            policy.set_params(&p);
            m.policy_loss += mb.policy_loss;
            m.value_loss += mb.value_loss;
            m.approx_kl += mb.approx_kl;
            m.clip_fraction += mb.clip_fraction;
            count += 1;
        }
    }
    let n = count as f64;
    m.policy_loss /= n;
    m.value_loss /= n;
    m.approx_kl /= n;
    m.clip_fraction /= n;
    m.grad_norm /= n;
    Ok(m)
}
