use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rule-based sentence splitter settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    /// Words ending in a period that never end a sentence and stay whole as tokens.
    pub abbreviations: Vec<String>,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        let abbreviations = [
            "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "St.", "e.g.", "i.e.", "vs.", "etc.",
            "al.", "Fig.", "No.", "approx.",
        ];
        SegmenterConfig {
            abbreviations: abbreviations.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SegmenterConfig {
    fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.iter().any(|a| a == word)
    }
}

/// Splits text into sentences of tokens using the default abbreviation list.
pub fn segment(text: &str) -> Result<Vec<Vec<String>>> {
    segment_with(text, &SegmenterConfig::default())
}

pub fn segment_with(text: &str, config: &SegmenterConfig) -> Result<Vec<Vec<String>>> {
    let sentences: Vec<Vec<String>> = text
        .split('\n')
        .flat_map(|line| split_line(line, config))
        .map(|sentence| tokenize(sentence, config))
        .filter(|tokens| !tokens.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(sentences)
}

fn split_line<'a>(line: &'a str, config: &SegmenterConfig) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = line.char_indices().collect();

    for (k, &(at, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let Some(&(_, next)) = chars.get(k + 1) else {
            continue;
        };
        if !next.is_whitespace() {
            continue;
        }
        let following = chars[k + 1..].iter().map(|&(_, c)| c).find(|c| !c.is_whitespace());
        if !following.is_some_and(char::is_uppercase) {
            continue;
        }
        let end = at + c.len_utf8();
        let word_start = line[start..end]
            .rfind(char::is_whitespace)
            .map(|i| start + i + 1)
            .unwrap_or(start);
        if c == '.' && config.is_abbreviation(&line[word_start..end]) {
            continue;
        }
        out.push(&line[start..end]);
        start = end;
    }
    out.push(&line[start..]);
    out
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
                | '\u{00AB}' | '\u{00BB}'
        )
}

fn tokenize(sentence: &str, config: &SegmenterConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in sentence.split_whitespace() {
        if config.is_abbreviation(word) {
            tokens.push(word.to_string());
            continue;
        }
        let core_start = word.find(|c| !is_punct(c)).unwrap_or(word.len());
        let core_end = word
            .rfind(|c| !is_punct(c))
            .map(|i| i + word[i..].chars().next().map_or(1, char::len_utf8))
            .unwrap_or(core_start);
        tokens.extend(word[..core_start].chars().map(String::from));
        if core_start < core_end {
            tokens.push(word[core_start..core_end].to_string());
        }
        tokens.extend(word[core_end..].chars().map(String::from));
    }
    tokens
}
