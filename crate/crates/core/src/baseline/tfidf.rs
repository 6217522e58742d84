use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Term index and document frequencies learned from a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Term to dense column index, assigned in lexicographic order.
    pub index: BTreeMap<String, usize>,
    /// Document frequency per column.
    pub df: Vec<usize>,
    pub n_docs: usize,
}

fn normalize(token: &str) -> String {
    token.to_lowercase()
}

impl Vocabulary {
    /// Learns terms from tokenized documents. Tokens are lowercased.
    pub fn fit<S: AsRef<str>>(documents: &[Vec<S>]) -> Result<Self> {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in documents {
            let terms: BTreeSet<String> = doc.iter().map(|t| normalize(t.as_ref())).collect();
            for term in terms {
                *df.entry(term).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let index = df.keys().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary {
            index,
            df: df.into_values().collect(),
            n_docs: documents.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.df.len()
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }

    /// `ln(N / df)` for column `i`.
    pub fn idf(&self, i: usize) -> f64 {
        (self.n_docs as f64 / self.df[i] as f64).ln()
    }

    /// Terms in column order.
    pub fn terms(&self) -> Vec<&str> {
        let mut terms = vec![""; self.len()];
        for (t, &i) in &self.index {
            terms[i] = t;
        }
        terms
    }

    /// TF-IDF weights of one document; unseen terms are ignored.
    pub fn transform<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        if tokens.is_empty() {
            return out;
        }
        for token in tokens {
            if let Some(&i) = self.index.get(&normalize(token.as_ref())) {
                out[i] += 1.0;
            }
        }
        let len = tokens.len() as f64;
        for (i, w) in out.iter_mut().enumerate() {
            if *w > 0.0 {
                *w = *w / len * self.idf(i);
            }
        }
        out
    }
}
