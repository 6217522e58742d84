//! Article ingestion: HTML text extraction, sentence segmentation, label
//! binarization, stratified fold plans and class weights.

mod folds;
mod html;
mod labels;
mod segment;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use folds::{stratified_folds, stratified_holdout, stratify, Fold, FoldPlan};
pub use html::extract_text;
pub use labels::{binarize_labels, class_weights, ClassWeights};
pub use segment::{segment, segment_with, SegmenterConfig};

/// The five Brief DISCERN questions modelled by the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Q4,
    Q5,
    Q9,
    Q10,
    Q11,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Q4,
        Criterion::Q5,
        Criterion::Q9,
        Criterion::Q10,
        Criterion::Q11,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Q4 => "q4",
            Criterion::Q5 => "q5",
            Criterion::Q9 => "q9",
            Criterion::Q10 => "q10",
            Criterion::Q11 => "q11",
        }
    }

    /// Human-readable row label used by the rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Criterion::Q4 => "Q4: References",
            Criterion::Q5 => "Q5: Date",
            Criterion::Q9 => "Q9: How Treatment Works",
            Criterion::Q10 => "Q10: Treatment Benefits",
            Criterion::Q11 => "Q11: Treatment Risks",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "q4" => Ok(Criterion::Q4),
            "q5" => Ok(Criterion::Q5),
            "q9" => Ok(Criterion::Q9),
            "q10" => Ok(Criterion::Q10),
            "q11" => Ok(Criterion::Q11),
            other => Err(Error::Malformed(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    BreastCancer,
    Arthritis,
    Depression,
    Other,
}

impl Topic {
    pub fn as_str(self) -> &'static str {
        match self {
            Topic::BreastCancer => "breast_cancer",
            Topic::Arthritis => "arthritis",
            Topic::Depression => "depression",
            Topic::Other => "other",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace([' ', '-'], "_").as_str() {
            "breast_cancer" => Ok(Topic::BreastCancer),
            "arthritis" => Ok(Topic::Arthritis),
            "depression" => Ok(Topic::Depression),
            "other" => Ok(Topic::Other),
            other => Err(Error::Malformed(format!("unknown topic {other:?}"))),
        }
    }
}

/// One article as delivered by the rating campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawArticle {
    pub id: String,
    pub topic: Topic,
    pub html: String,
    /// Rater names, in the order their scores appear in `rater_scores`.
    pub raters: Vec<String>,
    pub rater_scores: BTreeMap<Criterion, Vec<i64>>,
}

/// A tokenized, labelled article.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub topic: Topic,
    pub sentences: Vec<Vec<String>>,
    pub labels: BTreeMap<Criterion, u8>,
    #[serde(default)]
    pub raw_scores: BTreeMap<Criterion, Vec<i64>>,
}

impl Document {
    /// Builds a document and checks its structural invariants.
    pub fn new(
        id: impl Into<String>,
        topic: Topic,
        sentences: Vec<Vec<String>>,
        labels: BTreeMap<Criterion, u8>,
        raw_scores: BTreeMap<Criterion, Vec<i64>>,
    ) -> Result<Self> {
        let doc = Document {
            id: id.into(),
            topic,
            sentences,
            labels,
            raw_scores,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Malformed("document id is empty".into()));
        }
        if self.sentences.is_empty() {
            return Err(Error::EmptyDocument);
        }
        for sentence in &self.sentences {
            if sentence.is_empty() || sentence.iter().any(|t| t.is_empty()) {
                return Err(Error::Malformed(format!(
                    "document {} has an empty sentence or token",
                    self.id
                )));
            }
        }
        for c in Criterion::ALL {
            match self.labels.get(&c) {
                Some(0) | Some(1) => {}
                _ => {
                    return Err(Error::Malformed(format!(
                        "document {} lacks a binary label for {c}",
                        self.id
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn label(&self, criterion: Criterion) -> u8 {
        self.labels[&criterion]
    }

    pub fn sentence_text(&self, index: usize) -> String {
        self.sentences[index].join(" ")
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Per-sentence token counts, the shape an embedding archive must match.
    pub fn shape(&self) -> Vec<usize> {
        self.sentences.iter().map(Vec::len).collect()
    }
}

/// Output of ingestion: documents plus their source HTML (needed by the
/// baseline's link features).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    #[serde(default)]
    pub sources: BTreeMap<String, String>,
}

impl Corpus {
    pub fn load(path: &Path) -> Result<Self> {
        let corpus: Corpus = serde_json::from_slice(&fs::read(path)?)?;
        for doc in &corpus.documents {
            doc.validate()?;
        }
        Ok(corpus)
    }

    pub fn source(&self, id: &str) -> &str {
        self.sources.get(id).map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    id: String,
    topic: String,
    rater: String,
    q4: i64,
    q5: i64,
    q9: i64,
    q10: i64,
    q11: i64,
}

/// Reads `labels.csv` plus `articles/<id>.html` from a corpus directory.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<RawArticle>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(dir.join("labels.csv"))?;
    let headers = reader.headers()?.clone();
    let expected = ["id", "topic", "rater", "q4", "q5", "q9", "q10", "q11"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Malformed(format!(
            "labels.csv header must be {}",
            expected.join(",")
        )));
    }

    let mut by_id: BTreeMap<String, RawArticle> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: LabelRow = row?;
        if row.id.is_empty() {
            return Err(Error::Malformed("empty article id in labels.csv".into()));
        }
        let topic: Topic = row.topic.parse()?;
        let entry = by_id.entry(row.id.clone()).or_insert_with(|| RawArticle {
            id: row.id.clone(),
            topic,
            html: String::new(),
            raters: Vec::new(),
            rater_scores: BTreeMap::new(),
        });
        if entry.topic != topic {
            return Err(Error::Malformed(format!(
                "article {} listed under two topics",
                row.id
            )));
        }
        if entry.raters.contains(&row.rater) {
            return Err(Error::Malformed(format!(
                "rater {} scored article {} twice",
                row.rater, row.id
            )));
        }
        entry.raters.push(row.rater);
        for (c, score) in Criterion::ALL
            .into_iter()
            .zip([row.q4, row.q5, row.q9, row.q10, row.q11])
        {
            if !(1..=5).contains(&score) {
                return Err(Error::InvalidScore(score));
            }
            entry.rater_scores.entry(c).or_default().push(score);
        }
    }

    let mut articles: Vec<RawArticle> = by_id.into_values().collect();
    for article in &mut articles {
        let path = dir.join("articles").join(format!("{}.html", article.id));
        article.html = fs::read_to_string(&path).map_err(|e| {
            Error::Malformed(format!("cannot read {}: {e}", path.display()))
        })?;
    }
    Ok(articles)
}

/// Turns a rated article into a labelled, tokenized document.
pub fn prepare_document(article: &RawArticle, config: &SegmenterConfig) -> Result<Document> {
    let text = extract_text(&article.html)?;
    let sentences = segment_with(&text, config)?;
    let mut labels = BTreeMap::new();
    for c in Criterion::ALL {
        let scores = article
            .rater_scores
            .get(&c)
            .ok_or_else(|| Error::Malformed(format!("article {} has no {c} scores", article.id)))?;
        labels.insert(c, binarize_labels(scores)?);
    }
    Document::new(
        article.id.clone(),
        article.topic,
        sentences,
        labels,
        article.rater_scores.clone(),
    )
}

/// Ingests a corpus directory end to end.
pub fn ingest(dir: &Path, config: &SegmenterConfig) -> Result<Corpus> {
    let articles = read_corpus_dir(dir)?;
    let mut corpus = Corpus::default();
    for article in articles {
        let doc = prepare_document(&article, config)?;
        corpus.sources.insert(article.id.clone(), article.html);
        corpus.documents.push(doc);
    }
    Ok(corpus)
}
