use std::fs;
use std::path::Path;

use autodiscern::baseline::BaselineConfig;
use autodiscern::corpus::SegmenterConfig;
use autodiscern::training::{SearchSpace, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Contents of the `--config` file. Every section is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub segmenter: SegmenterConfig,
    pub train: TrainConfig,
    pub search: SearchSpace,
    pub baseline: BaselineConfig,
    /// Cross-validation folds for `evaluate`.
    pub folds: usize,
    pub coverage: Vec<f64>,
    pub k: usize,
    /// Seed of the hash embedder.
    pub hash_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            segmenter: SegmenterConfig::default(),
            train: TrainConfig::default(),
            search: SearchSpace::default(),
            baseline: BaselineConfig::default(),
            folds: 5,
            coverage: vec![0.8, 1.0],
            k: 3,
            hash_seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Applies `--seed` to every seeded stage.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(seed) = seed {
            self.train.seed = seed;
            self.search.base_seed = seed;
        }
        self
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }
}
