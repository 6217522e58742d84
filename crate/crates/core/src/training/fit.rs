use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{example_loss_graph, objective_graph};
use super::optim::OptimizerState;
use super::TrainConfig;
use crate::corpus::{class_weights, stratified_holdout, Criterion, Document};
use crate::embeddings::{embed_document, EmbeddingSource};
use crate::error::{Error, Result};
use crate::evaluation::{metrics, Metrics};
use crate::hea::{forward, forward_graph, Checkpoint, CheckpointHeader, Dropout, ModelParams, Prediction};
use crate::numerics::{Graph, Tensor};

/// Share of a training split held out for best-epoch selection.
pub const VALIDATION_FRACTION: f64 = 0.1;

/// An embedded document with its label for one criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub sentences: Vec<Tensor>,
    pub label: u8,
}

pub fn embed_examples(docs: &[&Document], criterion: Criterion, source: EmbeddingSource<'_>) -> Result<Vec<Example>> {
    docs.iter()
        .map(|d| {
            Ok(Example {
                id: d.id.clone(),
                sentences: embed_document(d, source)?,
                label: d.label(criterion),
            })
        })
        .collect()
}

/// Stratified, seeded split of `examples` into training and validation parts.
pub fn split_validation(examples: &[Example], seed: u64) -> (Vec<Example>, Vec<Example>) {
    let labels: Vec<u8> = examples.iter().map(|e| e.label).collect();
    let (kept, held) = stratified_holdout(&labels, VALIDATION_FRACTION, seed);
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| examples[i].clone()).collect();
    (pick(kept), pick(held))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub trial: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1_macro: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

pub fn predict_examples(params: &ModelParams, examples: &[Example]) -> Result<Vec<Prediction>> {
    examples.iter().map(|e| forward(params, &e.sentences)).collect()
}

fn evaluate(params: &ModelParams, examples: &[Example]) -> Result<Metrics> {
    let preds = predict_examples(params, examples)?;
    let pairs: Vec<(u8, u8)> = preds.iter().zip(examples).map(|(p, e)| (p.label, e.label)).collect();
    Ok(metrics(&pairs))
}

/// Trains one model and keeps the parameters of the epoch with the best
/// validation F1-macro (earliest on ties).
pub fn train_fold(train: &[Example], val: &[Example], config: &TrainConfig, criterion: Criterion) -> Result<TrainOutcome> {
    config.validate()?;
    if val.is_empty() {
        return Err(Error::Malformed("validation set is empty".into()));
    }
    let labels: Vec<u8> = train.iter().map(|e| e.label).collect();
    let weights = class_weights(&labels)?;

    let mut params = ModelParams::init(&config.model, config.seed)?;
    let mut optimizer = OptimizerState::new(config.optimizer, &params.store);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_f00d);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(usize, f64, ModelParams)> = None;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut g = Graph::new();
            let bound = params.bind(&mut g)?;
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let ex = &train[i];
                let dropout = Dropout {
                    p: config.dropout,
                    rng: &mut rng,
                };
                let out = forward_graph(&mut g, &params, &bound, &ex.sentences, Some(dropout))
                    .map_err(|e| diverged(e, epoch))?;
                losses.push(example_loss_graph(&mut g, out.probs, ex.label, weights.get(ex.label))?);
            }
            let nodes = g.param_nodes();
            let obj = objective_graph(&mut g, &losses, &nodes, config.l2).map_err(|e| diverged(e, epoch))?;
            let value = g.value(obj).item();
            if !value.is_finite() {
                return Err(Error::DivergedLoss { epoch, value });
            }
            total += value * batch.len() as f64;
            g.backward(obj).map_err(|e| diverged(e, epoch))?;
            optimizer.step(&mut params.store, &g.param_grads(), config.learning_rate)?;
        }
        let train_loss = total / train.len() as f64;
        let m = evaluate(&params, val).map_err(|e| diverged(e, epoch))?;
        log.push(EpochLog {
            trial: 0,
            epoch,
            train_loss,
            val_f1_macro: m.f1_macro,
            val_accuracy: m.accuracy,
        });
        if best.as_ref().is_none_or(|(_, f1, _)| m.f1_macro > *f1) {
            best = Some((epoch, m.f1_macro, params.clone()));
        }
    }
    let (best_epoch, val_f1_macro, best_params) = best.expect("max_epochs >= 1");
    let header = CheckpointHeader {
        config: config.clone(),
        criterion,
        best_epoch,
        val_f1_macro,
        seed: config.seed,
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(header, best_params),
        log,
    })
}

/// Non-finite values during training surface as divergence.
fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(_) => Error::DivergedLoss { epoch, value: f64::NAN },
        other => other,
    }
}

/// Embeds documents, holds out a validation split of `train` (seeded by the
/// config), trains one model and predicts `test`.
pub fn train_and_predict(
    train: &[&Document],
    test: &[&Document],
    config: &TrainConfig,
    criterion: Criterion,
    source: EmbeddingSource<'_>,
) -> Result<(TrainOutcome, Vec<Prediction>)> {
    let examples = embed_examples(train, criterion, source)?;
    let (fit, val) = split_validation(&examples, config.seed);
    let outcome = train_fold(&fit, &val, config, criterion)?;
    let test = embed_examples(test, criterion, source)?;
    let preds = predict_examples(&outcome.checkpoint.params, &test)?;
    Ok((outcome, preds))
}
