use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::GenConfig;
use crate::enrich::{JoinPolicy, NormalizeOptions};
use crate::error::{Error, Result};
use crate::graph::{FeatureMode, SplitFractions};
use crate::rgcn::ModelConfig;

pub const DEFAULT_INDICATORS_PATH: &str = "fixtures/country_indicators.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    Synthetic,
    Hybrid,
    #[default]
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> &'static [FeatureMode] {
        match self {
            ModeSelection::Synthetic => &[FeatureMode::Synthetic],
            ModeSelection::Hybrid => &[FeatureMode::Hybrid],
            ModeSelection::Both => &[FeatureMode::Synthetic, FeatureMode::Hybrid],
        }
    }
}

/// One experiment, read from a single strict JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub generator: GenConfig,
    pub indicators_path: PathBuf,
    pub normalization: NormalizeOptions,
    pub join_policy: JoinPolicy,
    pub mode: ModeSelection,
    pub split: SplitFractions,
    pub model: ModelConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GenConfig {
                n_transactions: 20_000,
                ..GenConfig::default()
            },
            indicators_path: PathBuf::from(DEFAULT_INDICATORS_PATH),
            normalization: NormalizeOptions::default(),
            join_policy: JoinPolicy::Strict,
            mode: ModeSelection::Both,
            split: SplitFractions::default(),
            model: ModelConfig::default(),
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn needs_indicators(&self, modes: &[FeatureMode]) -> bool {
        modes.contains(&FeatureMode::Hybrid)
    }

    /// Checks everything that can be checked before any data is generated.
    pub fn validate_for(&self, modes: &[FeatureMode]) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        self.generator.validate()?;
        self.split.validate()?;
        self.model.validate()?;
        if self.needs_indicators(modes) && !self.indicators_path.is_file() {
            return Err(Error::Config(format!(
                "indicator file {} does not exist",
                self.indicators_path.display()
            )));
        }
        Ok(())
    }

    /// Generator settings for one experiment seed.
    pub fn generator_for_seed(&self, seed: u64) -> GenConfig {
        GenConfig {
            rng_seed: seed,
            ..self.generator.clone()
        }
    }
}
