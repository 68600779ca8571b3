//! Actor-critic with a tanh-squashed Gaussian over the single action.

use super::mlp::{Mlp, MlpCache};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(1 - tanh(u)^2)`, stable for large `|u|`.
pub fn log_tanh_jacobian(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Log-density of `u ~ N(mean, exp(log_std))`.
pub fn gaussian_log_prob(u: f64, mean: f64, log_std: f64) -> f64 {
    let z = (u - mean) / log_std.exp();
    -0.5 * z * z - log_std - HALF_LN_2PI
}

/// Log-density of the squashed action `tanh(u)`, expressed through `u`.
pub fn squashed_log_prob(u: f64, mean: f64, log_std: f64) -> f64 {
    gaussian_log_prob(u, mean, log_std) - log_tanh_jacobian(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Pre-squash Gaussian draw.
    pub u: f64,
    pub action: f64,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub actor: Mlp,
    pub critic: Mlp,
    pub log_std: f64,
}

impl Policy {
    pub fn new(obs_dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self {
            actor: Mlp::new(&sizes, 0.01, rng),
            critic: Mlp::new(&sizes, 1.0, rng),
            log_std: 0.0,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.n_inputs()
    }

    pub fn log_std(&self) -> f64 {
        self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    pub fn mean(&self, obs: &[f64]) -> f64 {
        self.actor.eval(obs)[0]
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.eval(obs)[0]
    }

    pub fn deterministic_action(&self, obs: &[f64]) -> f64 {
        self.mean(obs).tanh()
    }

    pub fn sample(&self, obs: &[f64], rng: &mut impl Rng) -> Sample {
        let mean = self.mean(obs);
        let ls = self.log_std();
        let eps: f64 = StandardNormal.sample(rng);
        let u = mean + ls.exp() * eps;
        Sample {
            u,
            action: u.tanh(),
            log_prob: squashed_log_prob(u, mean, ls),
            value: self.value(obs),
        }
    }

    pub fn log_prob(&self, obs: &[f64], u: f64) -> f64 {
        squashed_log_prob(u, self.mean(obs), self.log_std())
    }

    pub fn n_params(&self) -> usize {
        self.actor.n_params() + 1 + self.critic.n_params()
    }

    /// Flat layout: actor, log-std, critic.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.actor.params();
        p.push(self.log_std);
        p.extend(self.critic.params());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let na = self.actor.n_params();
        self.actor.set_params(&p[..na]);
        self.log_std = p[na].clamp(LOG_STD_MIN, LOG_STD_MAX);
        self.critic.set_params(&p[na + 1..]);
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    /// Forward pass that keeps activations for [`Policy::backward_train`].
    /// Returns `(log pi(u | obs), V(obs))`.
    pub(crate) fn forward_train(&self, obs: &[f64], u: f64, s: &mut TrainScratch) -> (f64, f64) {
        self.actor.forward(obs, &mut s.actor);
        self.critic.forward(obs, &mut s.critic);
        let mean = s.actor.output()[0];
        (squashed_log_prob(u, mean, self.log_std()), s.critic.output()[0])
    }

    /// Accumulates `w_logp * d(log pi)/d(params) + w_value * dV/d(params)`
    /// into `grad`, using the activations from the matching forward pass.
    pub(crate) fn backward_train(&self, u: f64, w_logp: f64, w_value: f64, s: &TrainScratch, grad: &mut [f64]) {
        let na = self.actor.n_params();
        if w_logp != 0.0 {
            let mean = s.actor.output()[0];
            let var = (2.0 * self.log_std()).exp();
            self.actor.backward(&s.actor, &[w_logp * (u - mean) / var], &mut grad[..na]);
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&self.log_std) {
                grad[na] += w_logp * ((u - mean).powi(2) / var - 1.0);
            }
        }
        if w_value != 0.0 {
            self.critic.backward(&s.critic, &[w_value], &mut grad[na + 1..]);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct TrainScratch {
    actor: MlpCache,
    critic: MlpCache,
}
