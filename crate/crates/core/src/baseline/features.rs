use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

/// Names of the engineered feature columns, in vector order.
pub const ENGINEERED_NAMES: [&str; 5] = [
    "link_count",
    "bibliography_keyword_count",
    "date_pattern_count",
    "medical_lexicon_count",
    "polarity",
];

/// Word lists behind the engineered features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lexicons {
    pub bibliography: Vec<String>,
    pub medical: Vec<String>,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl Default for Lexicons {
    fn default() -> Self {
        Lexicons {
            bibliography: owned(&["references", "bibliography", "et al", "doi", "pmid", "journal", "cited"]),
            medical: owned(&[
                "adhd", "anxiety", "asthma", "blood", "cancer", "chronic", "clinical", "cognitive",
                "depression", "diabetes", "diagnosis", "disease", "disorder", "dose", "drug",
                "heart", "infection", "inflammation", "medication", "neurological", "pain",
                "patient", "physician", "placebo", "prescription", "sclerosis", "stimulant",
                "surgery", "symptom", "symptoms", "syndrome", "therapy", "treatment", "trial",
                "tumor", "vaccine",
            ]),
            positive: owned(&[
                "benefit", "best", "effective", "good", "great", "helpful", "improve", "improved",
                "relief", "safe", "success", "successful", "well",
            ]),
            negative: owned(&[
                "bad", "danger", "dangerous", "fail", "failure", "harm", "harmful", "poor", "risk",
                "risky", "severe", "toxic", "worse", "worst",
            ]),
        }
    }
}

/// Surface features of one article.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineeredFeatures {
    pub link_count: f64,
    pub bibliography_keyword_count: f64,
    pub date_pattern_count: f64,
    pub medical_lexicon_count: f64,
    /// `(pos - neg) / (pos + neg + 1)`, in `(-1, 1)`.
    pub polarity: f64,
}

impl EngineeredFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.link_count,
            self.bibliography_keyword_count,
            self.date_pattern_count,
            self.medical_lexicon_count,
            self.polarity,
        ]
    }
}

fn insensitive(pattern: &str) -> Regex {
    RegexBuilder::new(pattern).case_insensitive(true).build().expect("static pattern")
}

fn link_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| insensitive(r"<a\s[^>]*\bhref\s*="))
}

fn citation_pattern() -> &'static Regex {
    // journal volume/page style, e.g. "2007; 369(9555):29-36"
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| insensitive(r"\b(?:19|20)\d{2}\s*;\s*\d+\s*(?:\(\s*\d+\s*\))?\s*:\s*\d+"))
}

fn date_patterns() -> &'static [Regex] {
    static RE: OnceLock<Vec<Regex>> = OnceLock::new();
    RE.get_or_init(|| {
        [
            r"\breview(?:ed)?\s+date\b",
            r"\blast\s+(?:updated|reviewed|modified)\b",
            r"\bupdated\s+on\b",
            r"\b\d{1,2}\s*[/.-]\s*\d{1,2}\s*[/.-]\s*\d{2,4}\b",
            r"\b(?:19|20)\d{2}\s*-\s*\d{1,2}\s*-\s*\d{1,2}\b",
            r"\b(?:jan|feb|mar|apr|may|jun|jul|aug|sep|sept|oct|nov|dec)[a-z]*\.?\s+(?:\d{1,2},?\s+)?(?:19|20)\d{2}\b",
        ]
        .iter()
        .map(|p| insensitive(p))
        .collect()
    })
}

fn phrase_count(text: &str, phrase: &str) -> usize {
    let pattern = format!(r"\b{}\b", regex::escape(phrase).replace(' ', r"\s+"));
    insensitive(&pattern).find_iter(text).count()
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Link, bibliography, date, medical-term and polarity features from the raw
/// HTML (links) and the extracted text (everything else).
pub fn engineered_features(html: &str, text: &str, lexicons: &Lexicons) -> EngineeredFeatures {
    let link_count = link_pattern().find_iter(html).count();
    let bibliography = lexicons.bibliography.iter().map(|k| phrase_count(text, k)).sum::<usize>()
        + citation_pattern().find_iter(text).count();
    let dates: usize = date_patterns().iter().map(|re| re.find_iter(text).count()).sum();

    let words = words(text);
    let count_in = |list: &[String]| words.iter().filter(|w| list.contains(w)).count();
    let medical = count_in(&lexicons.medical);
    let pos = count_in(&lexicons.positive) as f64;
    let neg = count_in(&lexicons.negative) as f64;

    EngineeredFeatures {
        link_count: link_count as f64,
        bibliography_keyword_count: bibliography as f64,
        date_pattern_count: dates as f64,
        medical_lexicon_count: medical as f64,
        polarity: (pos - neg) / (pos + neg + 1.0),
    }
}
