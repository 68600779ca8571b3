//! Rollout storage and generalized advantage estimation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    pub obs: Vec<Vec<f64>>,
    /// Pre-squash Gaussian draws.
    pub raw_actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    /// Value of the final observation on truncated steps, 0 elsewhere.
    pub truncation_values: Vec<f64>,
    /// Value of the observation following the last stored step, used when
    /// the buffer ends mid-episode.
    pub last_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            obs: Vec::with_capacity(n),
            raw_actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            terminated: Vec::with_capacity(n),
            truncated: Vec::with_capacity(n),
            truncation_values: Vec::with_capacity(n),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: Vec<f64>,
        raw_action: f64,
        log_prob: f64,
        value: f64,
        reward: f64,
        terminated: bool,
        truncated: bool,
        truncation_value: f64,
    ) {
        self.obs.push(obs);
        self.raw_actions.push(raw_action);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.rewards.push(reward);
        self.terminated.push(terminated);
        self.truncated.push(truncated);
        self.truncation_values.push(if truncated { truncation_value } else { 0.0 });
    }

    /// Value that follows step `t` and whether the episode continues past it.
    pub fn next_value(&self, t: usize) -> (f64, bool) {
        if self.terminated[t] {
            (0.0, false)
        } else if self.truncated[t] {
            (self.truncation_values[t], false)
        } else if t + 1 == self.len() {
            (self.last_value, true)
        } else {
            (self.values[t + 1], true)
        }
    }

    /// One-step temporal-difference error at `t`.
    pub fn td_error(&self, t: usize, gamma: f64) -> f64 {
        let (nv, _) = self.next_value(t);
        self.rewards[t] + gamma * nv - self.values[t]
    }
}

/// Fills `advantages` and `returns`. Terminated steps do not bootstrap;
/// truncated steps bootstrap from the final observation's value.
pub fn compute_gae(buf: &mut RolloutBuffer, gamma: f64, lambda: f64) {
    let n = buf.len();
    buf.advantages = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let (_, cont) = buf.next_value(t);
        let delta = buf.td_error(t, gamma);
        gae = delta + if cont { gamma * lambda * gae } else { 0.0 };
        buf.advantages[t] = gae;
    }
    buf.returns = buf.advantages.iter().zip(&buf.values).map(|(a, v)| a + v).collect();
}

/// Shifts and scales to zero mean, unit standard deviation.
pub fn normalize(v: &mut [f64]) {
    if v.len() < 2 {
        return;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x = (*x - mean) / std);
}
