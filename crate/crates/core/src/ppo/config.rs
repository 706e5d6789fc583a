//! Training configuration file (TOML with `[trainer]`, `[reward]` and
//! `[perception]` tables; every field optional).

use serde::{Deserialize, Serialize};

use super::trainer::TrainerConfig;
use crate::perception::PerceptionConfig;
use crate::reward::RewardConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub trainer: TrainerConfig,
    pub reward: RewardConfig,
    pub perception: PerceptionConfig,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl TrainingConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.trainer.validate()?;
        if self.reward.max_step == 0 {
            return Err(ConfigError::Invalid(
                "reward.max_step must be positive".into(),
            ));
        }
        if self
            .perception
            .sensors
            .iter()
            .any(|s| s.ray_count == 0 || !(s.ray_length > 0.0))
        {
            return Err(ConfigError::Invalid(
                "every sensor needs rays and a positive length".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::ShapingMode;

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = TrainingConfig::from_toml_str(
            "[trainer]\nnum_parallel_agents = 8\nseed = 3\n\n[reward]\nshaping_mode = \"potential\"\n",
        )
        .unwrap();
        assert_eq!(cfg.trainer.num_parallel_agents, 8);
        assert_eq!(cfg.trainer.gamma, 0.995);
        assert_eq!(cfg.reward.shaping_mode, ShapingMode::Potential);
        assert_eq!(cfg.perception.observation_len(), 70);
    }

    #[test]
    fn round_trips_through_text() {
        let cfg = TrainingConfig::default();
        assert_eq!(
            TrainingConfig::from_toml_str(&cfg.to_toml_string()).unwrap(),
            cfg
        );
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            TrainingConfig::from_toml_str("[trainer]\ngamma = 1.5\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            TrainingConfig::from_toml_str("[trainer]\nclip_epsilon = 0\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            TrainingConfig::from_toml_str("[trainer\n"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            TrainingConfig::from_toml_str("[trainer]\nbogus = 1\n"),
            Err(ConfigError::Parse(_))
        ));
    }
}
