use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{train_fold, EpochLog, Example};
use super::{Checkpoint, SearchSpace, TrainConfig};
use crate::corpus::Criterion;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub config: TrainConfig,
    /// Best validation F1-macro; `None` when the trial failed.
    pub val_f1_macro: Option<f64>,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
    pub log: Vec<EpochLog>,
    #[serde(skip)]
    pub checkpoint: Option<Checkpoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// Index into `trials` of the winner.
    pub best: usize,
    pub trials: Vec<TrialResult>,
}

impl SearchResult {
    pub fn best_trial(&self) -> &TrialResult {
        &self.trials[self.best]
    }
}

/// Trains one sampled configuration per trial (in parallel) and picks the
/// highest validation F1-macro, lowest trial index on ties. Failed trials are
/// recorded, not fatal.
pub fn random_search(space: &SearchSpace, train: &[Example], val: &[Example], criterion: Criterion) -> Result<SearchResult> {
    space.validate()?;
    let trials: Vec<TrialResult> = (0..space.n_trials)
        .into_par_iter()
        .map(|trial| {
            let config = space.sample(trial);
            match train_fold(train, val, &config, criterion) {
                Ok(out) => TrialResult {
                    trial,
                    config,
                    val_f1_macro: Some(out.checkpoint.header.val_f1_macro),
                    best_epoch: Some(out.checkpoint.header.best_epoch),
                    error: None,
                    log: out.log.into_iter().map(|l| EpochLog { trial, ..l }).collect(),
                    checkpoint: Some(out.checkpoint),
                },
                Err(e) => TrialResult {
                    trial,
                    config,
                    val_f1_macro: None,
                    best_epoch: None,
                    error: Some(e.to_string()),
                    log: Vec::new(),
                    checkpoint: None,
                },
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in trials.iter().enumerate() {
        if let Some(f1) = t.val_f1_macro {
            if best.is_none_or(|(_, b)| f1 > b) {
                best = Some((i, f1));
            }
        }
    }
    match best {
        Some((best, _)) => Ok(SearchResult { best, trials }),
        None => Err(Error::InvalidConfig(format!(
            "all {} trials failed; first error: {}",
            trials.len(),
            trials[0].error.as_deref().unwrap_or("unknown")
        ))),
    }
}
