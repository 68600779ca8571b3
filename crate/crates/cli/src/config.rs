use anyhow::{bail, Context, Result};
use furrow_core::baseline::PdGains;
use furrow_core::env::EnvConfig;
use furrow_core::evalharness::RowTrackingConfig;
use furrow_core::learner::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Everything a run can be configured with. Every section and field is
/// optional in the file; missing values take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub rows: RowTrackingConfig,
    pub baseline: PdGains,
    pub teleop: TeleopConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Policy,
    Oracle,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub controller: ControllerKind,
    pub checkpoint: Option<PathBuf>,
    /// Sample actions instead of using the policy mean.
    pub stochastic: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trials: 420,
            master_seed: 0,
            controller: ControllerKind::Policy,
            checkpoint: None,
            stochastic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeleopConfig {
    pub port: u16,
    pub seed: u64,
    pub record_dir: Option<PathBuf>,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            port: 8765,
            seed: 0,
            record_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            _ => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.baseline.validate()?;
        if self.env.dt <= 0.0 || !self.env.dt.is_finite() {
            bail!("env.dt must be positive");
        }
        if self.eval.trials == 0 {
            bail!("eval.trials must be at least 1");
        }
        Ok(())
    }

    /// Writes the resolved configuration next to a run's outputs.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("config.toml");
        std::fs::write(&path, toml::to_string(self)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [env.field]
            n_rows = 3
            plants_per_row = 5
            plant_spacing = 0.6

            [train]
            total_steps = 4096
            "#,
        )
        .unwrap();
        assert_eq!(cfg.env.field, furrow_core::world::FieldConfig::reduced());
        assert_eq!(cfg.train.total_steps, 4096);
        assert_eq!(cfg.train.n_steps, 2048);
        assert_eq!(cfg.eval, EvalConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\nlearning_rat = 1.0").is_err());
        assert!(toml::from_str::<RunConfig>("[evaluation]\ntrials = 3").is_err());
    }
}
