//! Run configuration: a TOML file with one section per module. Command-line
//! flags override file values; missing values fall back to the defaults
//! below, which follow the published setup wherever it names a number.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use levelchain::forest::ForestConfig;
use levelchain::nn::Schedule;
use levelchain::vae::VaeConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: CorpusSection,
    pub vae: VaeSection,
    pub forest: ForestSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub stride: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 10000 epochs, lr decayed every 2500, KL annealed over 2500.
    Paper,
    /// The same schedule compressed to 2000 epochs, hidden widths 256/128/128.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeSection {
    pub profile: Profile,
    /// Encoder hidden widths; the profile's widths when unset.
    pub hidden: Option<Vec<usize>>,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Stop early after this many epochs.
    pub epochs: Option<usize>,
    /// Train on an evenly spaced subset of at most this many pairs.
    pub max_pairs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub trees: usize,
    pub max_features: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub oversample: bool,
    /// Held-out share for the evaluation report; 0 trains on everything.
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub levels: usize,
    /// Segments per level; the domain default (12, or 16 for MM) when unset.
    pub segments: Option<usize>,
    pub progression_multiplier: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection { stride: 1, offset: 16 }
    }
}

impl Default for VaeSection {
    fn default() -> Self {
        let base = VaeConfig::default();
        VaeSection {
            profile: Profile::Paper,
            hidden: None,
            batch_size: base.batch_size,
            base_lr: base.schedule.base_lr,
            epochs: None,
            max_pairs: None,
        }
    }
}

impl Default for ForestSection {
    fn default() -> Self {
        let base = ForestConfig::default();
        ForestSection {
            trees: base.n_trees,
            max_features: base.max_features,
            min_samples_split: base.min_samples_split,
            max_depth: base.max_depth,
            oversample: base.oversample,
            test_fraction: 0.3,
        }
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection { levels: 100, segments: None, progression_multiplier: 10 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| levelchain::Error::Config(format!("{}: {e}", path.display())))
            .map_err(Into::into)
    }

    pub fn vae_config(&self) -> VaeConfig {
        let base = match self.vae.profile {
            Profile::Paper => VaeConfig::default(),
            Profile::Desk => VaeConfig::desk(),
        };
        VaeConfig {
            hidden: self.vae.hidden.clone().unwrap_or_else(|| base.hidden.clone()),
            batch_size: self.vae.batch_size,
            schedule: Schedule { base_lr: self.vae.base_lr, ..base.schedule },
            seed: self.seed,
            max_epochs: self.vae.epochs,
            ..base
        }
    }

    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.forest.trees,
            max_features: self.forest.max_features,
            min_samples_split: self.forest.min_samples_split,
            max_depth: self.forest.max_depth,
            oversample: self.forest.oversample,
            seed: self.seed,
        }
    }
}
