//! Rollout collection and the collect/update loop.

use super::adam::Adam;
use super::buffer::{compute_gae, RolloutBuffer};
use super::policy::Policy;
use super::ppo::{ppo_update, TrainConfig, UpdateMetrics};
use super::LearnerError;
use crate::env::{derive_seed, EnvConfig, FieldEnv, OBS_DIM};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Episode seeds used during training start here, clear of evaluation seeds.
const TRAIN_EPISODE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    pub seed: u64,
    pub reward: f64,
    pub length: usize,
    pub success: bool,
}

/// Carries an unfinished episode across rollouts.
#[derive(Debug, Clone)]
pub struct Collector {
    pub env: FieldEnv,
    master_seed: u64,
    next_episode: u64,
    obs: Option<Vec<f64>>,
    episode_seed: u64,
    episode_reward: f64,
    episode_len: usize,
    rng: ChaCha8Rng,
}

impl Collector {
    pub fn new(env_config: EnvConfig, master_seed: u64) -> Self {
        Self {
            env: FieldEnv::new(env_config),
            master_seed,
            next_episode: 0,
            obs: None,
            episode_seed: 0,
            episode_reward: 0.0,
            episode_len: 0,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(master_seed, 3)),
        }
    }

    fn begin_episode(&mut self) -> Result<Vec<f64>, LearnerError> {
        self.episode_seed = derive_seed(self.master_seed, TRAIN_EPISODE_STREAM + self.next_episode);
        self.next_episode += 1;
        self.episode_reward = 0.0;
        self.episode_len = 0;
        Ok(self.env.reset(self.episode_seed)?)
    }

    /// Collects exactly `n_steps` transitions, continuing any episode left
    /// open by the previous call.
    pub fn collect(&mut self, policy: &Policy, n_steps: usize) -> Result<(RolloutBuffer, Vec<EpisodeStat>), LearnerError> {
        let mut buf = RolloutBuffer::with_capacity(n_steps);
        let mut episodes = Vec::new();
        let mut obs = match self.obs.take() {
            Some(o) => o,
            None => self.begin_episode()?,
        };
        for _ in 0..n_steps {
            let s = policy.sample(&obs, &mut self.rng);
            let r = self.env.step(s.action)?;
            self.episode_reward += r.reward.total;
            self.episode_len += 1;
            let trunc_value = if r.truncated { policy.value(&r.observation) } else { 0.0 };
            buf.push(obs, s.u, s.log_prob, s.value, r.reward.total, r.terminated, r.truncated, trunc_value);
            if r.terminated || r.truncated {
                episodes.push(EpisodeStat {
                    seed: self.episode_seed,
                    reward: self.episode_reward,
                    length: self.episode_len,
                    success: r.info.outcome == Some(crate::env::Outcome::Goal),
                });
                obs = self.begin_episode()?;
            } else {
                obs = r.observation;
            }
        }
        buf.last_value = policy.value(&obs);
        self.obs = Some(obs);
        Ok((buf, episodes))
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: usize,
    pub step: usize,
    pub episodes: usize,
    pub mean_ep_reward: Option<f64>,
    pub mean_ep_len: Option<f64>,
    pub success_rate: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub log_std: f64,
}

impl MetricsRow {
    fn new(update: usize, step: usize, eps: &[EpisodeStat], m: &UpdateMetrics, log_std: f64) -> Self {
        let n = eps.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeStat) -> f64| (!eps.is_empty()).then(|| eps.iter().map(f).sum::<f64>() / n);
        Self {
            update,
            step,
            episodes: eps.len(),
            mean_ep_reward: mean(&|e| e.reward),
            mean_ep_len: mean(&|e| e.length as f64),
            success_rate: mean(&|e| f64::from(u8::from(e.success))),
            policy_loss: m.policy_loss,
            value_loss: m.value_loss,
            approx_kl: m.approx_kl,
            clip_fraction: m.clip_fraction,
            log_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub step: usize,
    pub train_config: TrainConfig,
    pub env_config: EnvConfig,
    pub policy: Policy,
}

pub const CHECKPOINT_FORMAT: &str = "furrow-ppo";
pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), LearnerError> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LearnerError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let c: Checkpoint = serde_json::from_reader(f)?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(LearnerError::Checkpoint(format!("unsupported checkpoint {} v{}", c.format, c.version)));
        }
        if !c.policy.is_finite() || c.policy.obs_dim() != OBS_DIM {
            return Err(LearnerError::Checkpoint("policy weights are invalid".into()));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub metrics: Vec<MetricsRow>,
    pub checkpoints: Vec<PathBuf>,
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<(), LearnerError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Alternates collection and updates until `total_steps` transitions have
/// been gathered. With `out_dir` set, checkpoints and `metrics.csv` are
/// written there.
pub fn train(
    cfg: &TrainConfig,
    env_config: &EnvConfig,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&MetricsRow),
) -> Result<TrainOutcome, LearnerError> {
    cfg.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 4));
    let mut policy = Policy::new(OBS_DIM, &cfg.hidden, &mut init_rng);
    let mut adam = Adam::new(policy.n_params(), cfg.learning_rate);
    let mut update_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 5));
    let mut collector = Collector::new(env_config.clone(), cfg.seed);
    let mut metrics = Vec::new();
    let mut checkpoints = Vec::new();
    let mut step = 0;
    let mut update = 0;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let checkpoint = |policy: &Policy, step: usize, name: String| -> Result<Option<PathBuf>, LearnerError> {
        let Some(dir) = out_dir else { return Ok(None) };
        let path = dir.join(name);
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            step,
            train_config: cfg.clone(),
            env_config: env_config.clone(),
            policy: policy.clone(),
        }
        .save(&path)?;
        Ok(Some(path))
    };

    while step < cfg.total_steps {
        let (mut buf, eps) = collector.collect(&policy, cfg.n_steps)?;
        step += buf.len();
        compute_gae(&mut buf, cfg.gamma, cfg.gae_lambda);
        let m = ppo_update(&mut policy, &mut adam, &mut buf, cfg, &mut update_rng)?;
        update += 1;
        let row = MetricsRow::new(update, step, &eps, &m, policy.log_std());
        log::info!(
            "update {update} step {step} episodes {} reward {:?} success {:?}",
            row.episodes,
            row.mean_ep_reward,
            row.success_rate
        );
        progress(&row);
        metrics.push(row);
        if cfg.checkpoint_every > 0 && update % cfg.checkpoint_every == 0 {
            checkpoints.extend(checkpoint(&policy, step, format!("checkpoint_{step:07}.json"))?);
        }
    }
    checkpoints.extend(checkpoint(&policy, step, "final.json".into())?);
    if let Some(dir) = out_dir {
        write_metrics_csv(&metrics, &dir.join("metrics.csv"))?;
    }
    Ok(TrainOutcome {
        policy,
        metrics,
        checkpoints,
    })
}

/// Trailing moving average with window `w` (shorter at the start).
pub fn moving_average(v: &[f64], w: usize) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            v[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}
