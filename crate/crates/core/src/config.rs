//! Declarative experiment configuration, read from a JSON file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aha::AhaConfig;
use crate::dataset::synth::{SynthConfig, SynthCorpus};
use crate::dataset::{load_omniglot, Dataset, DatasetError};
use crate::fastnn;
use crate::harness::{StmConfigs, SweepConfig};
use crate::ltm::LtmConfig;
use crate::nncore::NetConfig;

/// Overrides `data_dir` when set.
pub const DATA_DIR_ENV: &str = "AHA_DATA_DIR";
pub const CHECKPOINT_FILE: &str = "ltm.ckpt";
/// Name of the effective config echoed next to every output.
pub const CONFIG_ECHO_FILE: &str = "config.json";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Omniglot root holding `images_background/` and `images_evaluation/`.
    pub data_dir: PathBuf,
    /// Use the procedural stand-in corpus instead of `data_dir`.
    pub synthetic: Option<SynthConfig>,
    pub output_dir: PathBuf,
    /// LTM checkpoint; `<output_dir>/ltm.ckpt` when absent.
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
    pub ltm: LtmConfig,
    pub aha: AhaConfig,
    pub fastnn: NetConfig,
    pub sweep: SweepConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data/omniglot"),
            synthetic: None,
            output_dir: PathBuf::from("out"),
            checkpoint: None,
            seed: 0,
            ltm: LtmConfig::default(),
            aha: AhaConfig::default(),
            fastnn: fastnn::default_config(),
            sweep: SweepConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: Config = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ltm.validate().map_err(ConfigError::Invalid)?;
        self.aha.validate().map_err(ConfigError::Invalid)?;
        self.fastnn.validate("fastnn").map_err(ConfigError::Invalid)?;
        self.sweep.validate().map_err(ConfigError::Invalid)?;
        if let Some(s) = &self.synthetic {
            if s.writers < 2 || s.classes_per_alphabet == 0 || s.side < self.ltm.kernel {
                return Err(ConfigError::Invalid(
                    "synthetic corpus needs >= 2 writers, >= 1 class per alphabet and images no smaller than the kernel".into(),
                ));
            }
        }
        Ok(())
    }

    /// Caps the sweep at the reduced profile.
    pub fn fast(mut self) -> Self {
        let f = SweepConfig::fast();
        self.sweep.levels = self.sweep.levels.min(f.levels);
        self.sweep.seeds = self.sweep.seeds.min(f.seeds);
        self.sweep.runs = self.sweep.runs.min(f.runs);
        self
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.output_dir.join(CHECKPOINT_FILE))
    }

    pub fn stm_configs(&self) -> StmConfigs {
        StmConfigs {
            aha: self.aha.clone(),
            fastnn: self.fastnn,
        }
    }

    /// `data_dir`, unless the environment overrides it.
    pub fn data_root(&self) -> PathBuf {
        std::env::var_os(DATA_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| self.data_dir.clone())
    }

    pub fn load_dataset(&self) -> Result<Dataset, DatasetError> {
        match &self.synthetic {
            Some(s) => Ok(SynthCorpus::new(s.clone()).dataset()),
            None => load_omniglot(&self.data_root()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Writes the effective config into `dir` for provenance.
    pub fn echo(&self, dir: &Path) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(CONFIG_ECHO_FILE);
        fs::write(&path, self.to_json() + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let c = Config::default();
        let back: Config = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c: Config = serde_json::from_str(r#"{"seed": 7, "sweep": {"runs": 2}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.sweep.runs, 2);
        assert_eq!(c.sweep.levels, SweepConfig::full().levels);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"sed": 7}"#).is_err());
        assert!(serde_json::from_str::<Config>(r#"{"aha": {"ps": {"kps": 3}}}"#).is_err());
    }

    #[test]
    fn out_of_range_values_fail_validation() {
        let mut c = Config::default();
        c.aha.pc.theta = 1.5;
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
        let mut c = Config::default();
        c.sweep.levels = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn fast_caps_but_never_grows_the_sweep() {
        let c = Config::default().fast();
        assert_eq!((c.sweep.levels, c.sweep.seeds, c.sweep.runs), (5, 3, 5));
        let mut small = Config::default();
        small.sweep.runs = 2;
        assert_eq!(small.fast().sweep.runs, 2);
    }

    #[test]
    fn checkpoint_defaults_into_output_dir() {
        let c = Config::default();
        assert_eq!(c.checkpoint_path(), PathBuf::from("out").join(CHECKPOINT_FILE));
    }
}
