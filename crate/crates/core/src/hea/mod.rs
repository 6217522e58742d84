//! Hierarchical bi-GRU encoders with global attention (HEA) and the
//! mean-pooled ablation (HE).
//!
//! A document is encoded in two stages: each sentence's token vectors pass
//! through a bidirectional GRU whose end states form the sentence vector, then
//! the sentence vectors pass through a second bidirectional GRU producing one
//! contextual state per sentence. Those states are pooled (attention-weighted
//! or averaged) and classified with an affine map plus softmax.

mod attention;
mod checkpoint;
mod encoder;
mod gru;
mod model;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

pub use attention::{attention_weights, classify, pool_document};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader};
pub use encoder::{encode_document, encode_sentence, BoundEncoder};
pub use gru::{gru_step, BoundGru, GateTrace, GruIds};
pub use attention::BoundAttention;
pub use encoder::EncoderIds;
pub use model::{forward, forward_graph, BoundModel, Dropout, ForwardOutput, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Attention-weighted pooling.
    Hea,
    /// Mean pooling.
    He,
}

/// How the two directions of a bidirectional GRU are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Join {
    Concat,
    Sum,
}

impl Join {
    pub fn output_dim(self, hidden: usize) -> usize {
        match self {
            Join::Concat => 2 * hidden,
            Join::Sum => hidden,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    /// `q^T tanh(W l)`
    Additive,
    /// `q^T l / sqrt(D_l)`
    ScaledDot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Token vector size.
    pub embedding_dim: usize,
    pub sent_hidden: usize,
    pub doc_hidden: usize,
    pub sent_join: Join,
    pub doc_join: Join,
    pub attention: AttentionMode,
    /// Query size for additive scoring; defaults to the sentence-state size.
    #[serde(default)]
    pub query_dim: Option<usize>,
    /// Stacked bidirectional layers per encoder.
    #[serde(default = "one")]
    pub depth: usize,
}

fn one() -> usize {
    1
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Hea,
            embedding_dim: 32,
            sent_hidden: 32,
            doc_hidden: 32,
            sent_join: Join::Concat,
            doc_join: Join::Concat,
            attention: AttentionMode::Additive,
            query_dim: None,
            depth: 1,
        }
    }
}

impl ModelConfig {
    /// Size of a sentence vector.
    pub fn sentence_dim(&self) -> usize {
        self.sent_join.output_dim(self.sent_hidden)
    }

    /// Size of a contextual sentence state (also the document vector size).
    pub fn state_dim(&self) -> usize {
        self.doc_join.output_dim(self.doc_hidden)
    }

    pub fn query_dim(&self) -> usize {
        match self.attention {
            AttentionMode::ScaledDot => self.state_dim(),
            AttentionMode::Additive => self.query_dim.unwrap_or(self.state_dim()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.sent_hidden == 0 || self.doc_hidden == 0 {
            return Err(Error::InvalidConfig("model dimensions must be positive".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidConfig("encoder depth must be at least 1".into()));
        }
        if self.attention == AttentionMode::ScaledDot
            && self.query_dim.is_some_and(|q| q != self.state_dim())
        {
            return Err(Error::InvalidConfig(
                "scaled dot-product attention needs query_dim equal to the state size".into(),
            ));
        }
        if self.query_dim == Some(0) {
            return Err(Error::InvalidConfig("query_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Model output for one document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// `[fail, pass]`
    pub probs: [f64; 2],
    pub confidence: f64,
    pub label: u8,
    /// One weight per sentence; absent for mean-pooled models.
    pub attention: Option<Vec<f64>>,
}

impl Prediction {
    pub fn from_probs(probs: [f64; 2], attention: Option<Vec<f64>>) -> Self {
        // argmax, ties to fail
        let label = u8::from(probs[1] > probs[0]);
        Prediction {
            probs,
            confidence: probs[usize::from(label)],
            label,
            attention,
        }
    }
}

/// A sentence chosen as evidence for a prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub index: usize,
    pub text: String,
    pub attention: f64,
}

/// The `k` most attended sentences, highest weight first, ties to the lower index.
pub fn top_attended(pred: &Prediction, doc: &Document, k: usize) -> Result<Vec<Evidence>> {
    let weights = pred.attention.as_ref().ok_or(Error::NoAttention)?;
    if weights.len() != doc.sentences.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} attention weights for {} sentences",
            weights.len(),
            doc.sentences.len()
        )));
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| Evidence {
            index: i,
            text: doc.sentence_text(i),
            attention: weights[i],
        })
        .collect())
}
