use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hea::{AttentionMode, Join, ModelConfig, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 coefficient; the penalty is `l2 / 2 * |theta|^2`.
    pub l2: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            l2: 1e-5,
            dropout: 0.3,
            max_epochs: 50,
            batch_size: 8,
            optimizer: Optimizer::default(),
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidConfig(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidProbability(self.dropout));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("max_epochs and batch_size must be at least 1".into()));
        }
        if let Optimizer::Adam { beta1, beta2, epsilon } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon <= 0.0 {
                return Err(Error::InvalidConfig("adam needs beta1, beta2 in [0,1) and epsilon > 0".into()));
            }
        }
        Ok(())
    }
}

/// Candidate values for random search. Learning rate and `l2` are drawn
/// log-uniformly from their `(low, high)` ranges, everything else uniformly
/// from its set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub hidden: Vec<usize>,
    pub joins: Vec<Join>,
    pub attention: Vec<AttentionMode>,
    pub depth: Vec<usize>,
    pub dropout: Vec<f64>,
    pub l2: (f64, f64),
    pub learning_rate: (f64, f64),
    pub batch_size: Vec<usize>,
    pub max_epochs: usize,
    pub variant: Variant,
    pub embedding_dim: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub n_trials: usize,
    pub base_seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            hidden: vec![32, 64, 128],
            joins: vec![Join::Concat, Join::Sum],
            attention: vec![AttentionMode::Additive, AttentionMode::ScaledDot],
            depth: vec![1],
            dropout: vec![0.1, 0.3, 0.5],
            l2: (1e-6, 1e-2),
            learning_rate: (1e-4, 1e-2),
            batch_size: vec![4, 8],
            max_epochs: 50,
            variant: Variant::Hea,
            embedding_dim: 32,
            optimizer: Optimizer::default(),
            n_trials: 20,
            base_seed: 0,
        }
    }
}

fn log_uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
        }
        if self.hidden.is_empty()
            || self.joins.is_empty()
            || self.attention.is_empty()
            || self.depth.is_empty()
            || self.dropout.is_empty()
            || self.batch_size.is_empty()
        {
            return Err(Error::InvalidConfig("every search set must be nonempty".into()));
        }
        for (name, (lo, hi)) in [("l2", self.l2), ("learning_rate", self.learning_rate)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} range must satisfy 0 < low <= high")));
            }
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    /// The configuration of trial `trial`, a pure function of the space and index.
    pub fn sample(&self, trial: usize) -> TrainConfig {
        let seed = self.trial_seed(trial);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = |rng: &mut ChaCha8Rng, v: &[usize]| *v.choose(rng).expect("validated nonempty");
        let model = ModelConfig {
            variant: self.variant,
            embedding_dim: self.embedding_dim,
            sent_hidden: pick(&mut rng, &self.hidden),
            doc_hidden: pick(&mut rng, &self.hidden),
            sent_join: *self.joins.choose(&mut rng).expect("validated nonempty"),
            doc_join: *self.joins.choose(&mut rng).expect("validated nonempty"),
            attention: *self.attention.choose(&mut rng).expect("validated nonempty"),
            query_dim: None,
            depth: pick(&mut rng, &self.depth),
        };
        TrainConfig {
            dropout: *self.dropout.choose(&mut rng).expect("validated nonempty"),
            l2: log_uniform(&mut rng, self.l2),
            learning_rate: log_uniform(&mut rng, self.learning_rate),
            batch_size: pick(&mut rng, &self.batch_size),
            max_epochs: self.max_epochs,
            optimizer: self.optimizer,
            seed,
            model,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
        SearchSpace::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            TrainConfig { max_epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { dropout: 1.0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { l2: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let empty = SearchSpace { joins: vec![], ..Default::default() };
        assert!(empty.validate().is_err());
        assert!(SearchSpace { n_trials: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn samples_stay_in_space() {
        let space = SearchSpace::default();
        for t in 0..200 {
            let c = space.sample(t);
            c.validate().unwrap();
            assert_eq!(c.seed, t as u64);
            assert!(space.hidden.contains(&c.model.sent_hidden));
            assert!(space.dropout.contains(&c.dropout));
            assert!((1e-6..=1e-2).contains(&c.l2));
            assert!((1e-4..=1e-2).contains(&c.learning_rate));
            assert!(space.batch_size.contains(&c.batch_size));
        }
        assert_eq!(space.sample(5), space.sample(5));
        assert_ne!(space.sample(5), space.sample(6));
    }

    #[test]
    fn config_json_round_trip() {
        let c = TrainConfig::default();
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"kind\":\"adam\""));
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), c);
        let sgd = TrainConfig { optimizer: Optimizer::Sgd, ..c };
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&sgd).unwrap()).unwrap();
        assert_eq!(back.optimizer, Optimizer::Sgd);
    }
}
