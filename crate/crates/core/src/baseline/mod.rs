//! TF-IDF and surface-feature baseline with a random forest classifier.

mod features;
mod forest;
mod rfe;
mod tfidf;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use features::{engineered_features, EngineeredFeatures, Lexicons, ENGINEERED_NAMES};
pub use forest::{gini, rf_predict, rf_train, ForestConfig, ForestModel, Node};
pub use rfe::{rfe_cv, IndexFold, RfeResult, RfeRound};
pub use tfidf::Vocabulary;

use crate::corpus::{class_weights, extract_text, stratify, Criterion, Document};
use crate::error::{Error, Result};

fn tokens(doc: &Document) -> Vec<&str> {
    doc.sentences.iter().flatten().map(String::as_str).collect()
}

/// Full feature map: a TF-IDF block followed by the engineered block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub vocabulary: Vocabulary,
    pub lexicons: Lexicons,
}

impl FeatureSpace {
    /// Fits the vocabulary on training documents only.
    pub fn fit(train: &[&Document], lexicons: Lexicons) -> Result<Self> {
        let docs: Vec<Vec<&str>> = train.iter().map(|d| tokens(d)).collect();
        Ok(FeatureSpace { vocabulary: Vocabulary::fit(&docs)?, lexicons })
    }

    pub fn width(&self) -> usize {
        self.vocabulary.len() + ENGINEERED_NAMES.len()
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.vocabulary.terms().iter().map(|t| format!("tfidf:{t}")).collect();
        names.extend(ENGINEERED_NAMES.iter().map(|n| n.to_string()));
        names
    }

    /// Features of a document given its source HTML. Text features use the
    /// text extracted from the HTML, or the segmented tokens when none is available.
    pub fn transform(&self, doc: &Document, html: &str) -> Vec<f64> {
        let tokens = tokens(doc);
        let text = extract_text(html).unwrap_or_else(|_| tokens.join(" "));
        let mut out = self.vocabulary.transform(&tokens);
        out.extend(engineered_features(html, &text, &self.lexicons).to_vec());
        out
    }
}

/// Settings of the baseline pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub forest: ForestConfig,
    pub lexicons: Lexicons,
    /// Select features by recursive elimination before the final fit.
    pub rfe: bool,
    pub rfe_folds: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { forest: ForestConfig::default(), lexicons: Lexicons::default(), rfe: false, rfe_folds: 3 }
    }
}

/// A fitted feature map and forest for one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub criterion: Criterion,
    pub space: FeatureSpace,
    /// Columns kept by feature elimination; all columns when absent.
    pub selected: Option<Vec<usize>>,
    pub forest: ForestModel,
}

fn html_of<'a>(sources: &'a BTreeMap<String, String>, id: &str) -> &'a str {
    sources.get(id).map_or("", String::as_str)
}

impl BaselineModel {
    /// Fits on `train`; `sources` maps document ids to their HTML.
    pub fn fit(
        train: &[&Document],
        sources: &BTreeMap<String, String>,
        criterion: Criterion,
        config: &BaselineConfig,
        seed: u64,
    ) -> Result<Self> {
        let space = FeatureSpace::fit(train, config.lexicons.clone())?;
        let mut x: Vec<Vec<f64>> = train.iter().map(|d| space.transform(d, html_of(sources, &d.id))).collect();
        let y: Vec<u8> = train.iter().map(|d| d.label(criterion)).collect();
        let weights = class_weights(&y)?;
        let selected = if config.rfe {
            let assignment = stratify(&y, config.rfe_folds, seed)?;
            let folds: Vec<IndexFold> = (0..config.rfe_folds)
                .map(|k| IndexFold {
                    train: (0..y.len()).filter(|&i| assignment[i] != k).collect(),
                    test: (0..y.len()).filter(|&i| assignment[i] == k).collect(),
                })
                .collect();
            let result = rfe_cv(&x, &y, &folds, &config.forest, seed)?;
            x = x.iter().map(|row| result.selected.iter().map(|&c| row[c]).collect()).collect();
            Some(result.selected)
        } else {
            None
        };
        let forest = rf_train(&x, &y, weights, &config.forest, seed)?;
        Ok(BaselineModel { criterion, space, selected, forest })
    }

    pub fn features(&self, doc: &Document, html: &str) -> Vec<f64> {
        let full = self.space.transform(doc, html);
        match &self.selected {
            Some(cols) => cols.iter().map(|&c| full[c]).collect(),
            None => full,
        }
    }

    pub fn predict(&self, doc: &Document, html: &str) -> Result<(u8, f64)> {
        rf_predict(&self.forest, &self.features(doc, html))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: BaselineModel = serde_json::from_str(text)?;
        let width = model.selected.as_ref().map_or(model.space.width(), Vec::len);
        if width != model.forest.n_features {
            return Err(Error::Malformed("baseline feature map and forest disagree on width".into()));
        }
        Ok(model)
    }
}
