use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coverage::Scored;
use super::metrics::{metrics, Metrics};
use crate::corpus::{binarize_labels, Criterion, Document, FoldPlan};
use crate::error::{Error, Result};

/// One row of a prediction dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub criterion: Criterion,
    pub label_true: u8,
    pub label_pred: u8,
    pub confidence: f64,
}

impl PredictionRecord {
    pub fn scored(&self) -> Scored {
        Scored {
            predicted: self.label_pred,
            truth: self.label_true,
            confidence: self.confidence,
        }
    }
}

const PREDICTION_HEADER: [&str; 5] = ["doc_id", "criterion", "label_true", "label_pred", "confidence"];

/// CSV bytes of a prediction dump, header included.
pub fn predictions_csv(records: &[PredictionRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        w.write_record(PREDICTION_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    Ok(std::fs::write(path, predictions_csv(records)?)?)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != PREDICTION_HEADER {
        return Err(Error::Malformed(format!("unexpected prediction dump header {header:?}")));
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// Per-fold test metrics of one model on one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub model: String,
    pub criterion: Criterion,
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
    /// Sample standard deviation across folds.
    pub std: Metrics,
    pub predictions: Vec<PredictionRecord>,
}

fn combine(values: &[Metrics], f: impl Fn(&[f64]) -> f64) -> Metrics {
    let col = |g: fn(&Metrics) -> f64| f(&values.iter().map(g).collect::<Vec<_>>());
    Metrics {
        precision: col(|m| m.precision),
        recall: col(|m| m.recall),
        accuracy: col(|m| m.accuracy),
        f1_macro: col(|m| m.f1_macro),
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl CVReport {
    pub fn from_folds(model: &str, criterion: Criterion, folds: Vec<Metrics>, predictions: Vec<PredictionRecord>) -> Self {
        CVReport {
            model: model.to_string(),
            criterion,
            mean: combine(&folds, mean),
            std: combine(&folds, sample_std),
            folds,
            predictions,
        }
    }
}

/// Label and confidence for one test document.
pub type FoldPrediction = (u8, f64);

/// Runs `trainer` on every fold (in parallel) and scores its test predictions.
///
/// `trainer(fold_index, train, test)` must return one prediction per test document.
pub fn cross_validate<F>(model: &str, docs: &[Document], plan: &FoldPlan, trainer: F) -> Result<CVReport>
where
    F: Fn(usize, &[&Document], &[&Document]) -> Result<Vec<FoldPrediction>> + Sync,
{
    let lookup = |ids: &[String]| -> Result<Vec<&Document>> {
        ids.iter()
            .map(|id| {
                docs.iter()
                    .find(|d| &d.id == id)
                    .ok_or_else(|| Error::MissingDocument(id.clone()))
            })
            .collect()
    };
    let criterion = plan.criterion;
    let per_fold: Vec<(Metrics, Vec<PredictionRecord>)> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let train = lookup(&fold.train)?;
            let test = lookup(&fold.test)?;
            let preds = trainer(i, &train, &test)?;
            if preds.len() != test.len() {
                return Err(Error::ShapeMismatch(format!(
                    "fold {i}: {} predictions for {} test documents",
                    preds.len(),
                    test.len()
                )));
            }
            let records: Vec<PredictionRecord> = test
                .iter()
                .zip(&preds)
                .map(|(d, &(label_pred, confidence))| PredictionRecord {
                    doc_id: d.id.clone(),
                    criterion,
                    label_true: d.label(criterion),
                    label_pred,
                    confidence,
                })
                .collect();
            let pairs: Vec<(u8, u8)> = records.iter().map(|r| (r.label_pred, r.label_true)).collect();
            Ok((metrics(&pairs), records))
        })
        .collect::<Result<_>>()?;
    let (folds, records): (Vec<_>, Vec<_>) = per_fold.into_iter().unzip();
    Ok(CVReport::from_folds(model, criterion, folds, records.concat()))
}

/// Share of positions where the two label lists agree.
pub fn percent_agreement(labels: &[u8], reference: &[u8]) -> Result<f64> {
    if labels.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels against {} reference labels",
            labels.len(),
            reference.len()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let same = labels.iter().zip(reference).filter(|(a, b)| a == b).count();
    Ok(same as f64 / labels.len() as f64)
}

/// Mean over raters of each rater's agreement with the aggregated label, a
/// single score being binarized the same way as the aggregate.
pub fn rater_agreement(docs: &[Document], criterion: Criterion) -> Result<f64> {
    let raters = docs
        .iter()
        .filter_map(|d| d.raw_scores.get(&criterion).map(Vec::len))
        .max()
        .unwrap_or(0);
    if raters == 0 {
        return Err(Error::Malformed(format!("no rater scores for {criterion}")));
    }
    let mut shares = Vec::with_capacity(raters);
    for r in 0..raters {
        let mut own = Vec::new();
        let mut reference = Vec::new();
        for d in docs {
            if let Some(&score) = d.raw_scores.get(&criterion).and_then(|s| s.get(r)) {
                own.push(binarize_labels(&[score])?);
                reference.push(d.label(criterion));
            }
        }
        shares.push(percent_agreement(&own, &reference)?);
    }
    Ok(mean(&shares))
}
