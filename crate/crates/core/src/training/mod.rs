//! Weighted cross-entropy training of the hierarchical models, best-epoch
//! selection and random hyperparameter search.

mod config;
mod fit;
mod loss;
mod optim;
mod search;

pub use crate::hea::{Checkpoint, CheckpointHeader};
pub use config::{Optimizer, SearchSpace, TrainConfig};
pub use fit::{embed_examples, predict_examples, split_validation, train_and_predict, train_fold, EpochLog, Example, TrainOutcome, VALIDATION_FRACTION};
pub use loss::{example_loss, example_loss_graph, objective, objective_graph, LOG_FLOOR};
pub use optim::OptimizerState;
pub use search::{random_search, SearchResult, TrialResult};
