//! Planted-evidence corpora: negatives are filler prose, positives carry one
//! extra dated "review" sentence at a random position. Useful for checking
//! that a model finds the evidence and attends to it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{prepare_document, Corpus, Criterion, RawArticle, SegmenterConfig, Topic};
use crate::error::Result;

/// The criterion whose label the planted sentence decides.
pub const PLANTED_CRITERION: Criterion = Criterion::Q5;

const FILLER: &[&str] = &[
    "treatment", "patients", "doctor", "may", "help", "symptoms", "often", "many", "people", "pain",
    "therapy", "options", "daily", "exercise", "common", "condition", "body", "care", "can", "the",
    "a", "of", "and", "with", "for", "some", "is", "are", "this", "your", "health", "life", "feel",
    "years", "women", "men", "early", "signs", "support", "family", "friends", "sleep", "diet",
    "joint", "mood", "tumor", "cells", "blood", "tests", "changes",
];

const PREFIXES: &[&str] = &["Review Date :", "Last reviewed :", "Updated on"];

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub n_docs: usize,
    pub sentences: usize,
    pub positive_rate: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_docs: 200,
            sentences: 20,
            positive_rate: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedCorpus {
    pub articles: Vec<RawArticle>,
    pub corpus: Corpus,
    /// Sentence index of the planted sentence, per positive document.
    pub signal: BTreeMap<String, usize>,
}

fn filler_sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(5..11);
    let words: Vec<&str> = (0..n).map(|_| *FILLER.choose(rng).expect("nonempty")).collect();
    let mut s = words.join(" ");
    // Capitalized start, like real prose.
    s[..1].make_ascii_uppercase();
    s.push_str(" .");
    s
}

fn signal_sentence(rng: &mut ChaCha8Rng) -> String {
    let prefix = PREFIXES.choose(rng).expect("nonempty");
    let (m, d, y) = (rng.gen_range(1..=12), rng.gen_range(1..=28), rng.gen_range(2005..=2019));
    format!("{prefix} {m}/{d}/{y} .")
}

/// Two rater scores whose mean lands on the requested side of 3.
fn scores(rng: &mut ChaCha8Rng, pass: bool) -> [i64; 2] {
    loop {
        let s = [rng.gen_range(1..=5), rng.gen_range(1..=5)];
        if (s[0] + s[1] >= 6) == pass {
            return s;
        }
    }
}

pub fn planted_corpus(config: &PlantedConfig) -> Result<PlantedCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let topics = [Topic::BreastCancer, Topic::Arthritis, Topic::Depression];
    let n_pos = (config.n_docs as f64 * config.positive_rate).round() as usize;
    let mut positive: Vec<bool> = (0..config.n_docs).map(|i| i < n_pos).collect();
    positive.shuffle(&mut rng);

    let mut articles = Vec::with_capacity(config.n_docs);
    let mut signal = BTreeMap::new();
    for (i, &pos) in positive.iter().enumerate() {
        let id = format!("doc{i:04}");
        let mut sentences: Vec<String> = (0..config.sentences).map(|_| filler_sentence(&mut rng)).collect();
        if pos {
            let at = rng.gen_range(0..config.sentences);
            sentences[at] = signal_sentence(&mut rng);
            signal.insert(id.clone(), at);
        }
        let mut html = String::from("<html><head><title>Health article</title></head><body>\n");
        for s in &sentences {
            writeln!(html, "<p>{s}</p>").expect("string write");
        }
        html.push_str("</body></html>\n");

        let mut rater_scores: BTreeMap<Criterion, Vec<i64>> = BTreeMap::new();
        for c in Criterion::ALL {
            let pass = if c == PLANTED_CRITERION { pos } else { rng.gen_bool(0.5) };
            rater_scores.insert(c, scores(&mut rng, pass).to_vec());
        }
        articles.push(RawArticle {
            id,
            topic: topics[i % topics.len()],
            html,
            raters: vec!["r1".into(), "r2".into()],
            rater_scores,
        });
    }

    let segmenter = SegmenterConfig::default();
    let mut corpus = Corpus::default();
    for a in &articles {
        corpus.documents.push(prepare_document(a, &segmenter)?);
        corpus.sources.insert(a.id.clone(), a.html.clone());
    }
    Ok(PlantedCorpus {
        articles,
        corpus,
        signal,
    })
}

/// Writes articles in the layout `ingest` reads: `labels.csv` plus
/// `articles/<id>.html`.
pub fn write_corpus_dir(articles: &[RawArticle], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("articles"))?;
    let mut w = csv::Writer::from_path(dir.join("labels.csv"))?;
    w.write_record(["id", "topic", "rater", "q4", "q5", "q9", "q10", "q11"])?;
    for a in articles {
        fs::write(dir.join("articles").join(format!("{}.html", a.id)), &a.html)?;
        for (r, rater) in a.raters.iter().enumerate() {
            let mut row = vec![a.id.clone(), a.topic.to_string(), rater.clone()];
            for c in Criterion::ALL {
                row.push(a.rater_scores[&c][r].to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ingest;

    #[test]
    fn planted_structure() {
        let p = planted_corpus(&PlantedConfig::default()).unwrap();
        assert_eq!(p.corpus.documents.len(), 200);
        let date = regex::Regex::new(r"\d{1,2}/\d{1,2}/\d{4}").unwrap();
        for d in &p.corpus.documents {
            assert_eq!(d.sentences.len(), 20, "{}", d.id);
            let label = d.label(PLANTED_CRITERION);
            let dated: Vec<usize> = (0..20).filter(|&i| date.is_match(&d.sentence_text(i))).collect();
            match p.signal.get(&d.id) {
                Some(&at) => {
                    assert_eq!(label, 1);
                    assert_eq!(dated, vec![at]);
                }
                None => {
                    assert_eq!(label, 0);
                    assert!(dated.is_empty());
                }
            }
        }
        assert_eq!(p.signal.len(), 100);
    }

    #[test]
    fn deterministic_by_seed() {
        let c = PlantedConfig { n_docs: 10, ..Default::default() };
        assert_eq!(planted_corpus(&c).unwrap(), planted_corpus(&c).unwrap());
        let other = PlantedConfig { seed: 1, ..c.clone() };
        assert_ne!(planted_corpus(&c).unwrap().articles, planted_corpus(&other).unwrap().articles);
    }

    #[test]
    fn corpus_dir_round_trips_through_ingest() {
        let p = planted_corpus(&PlantedConfig { n_docs: 12, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus_dir(&p.articles, dir.path()).unwrap();
        let back = ingest(dir.path(), &SegmenterConfig::default()).unwrap();
        assert_eq!(back, p.corpus);
    }
}
