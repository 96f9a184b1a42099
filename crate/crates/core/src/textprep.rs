//! Text normalization: cleaning, tokenization, stop-word removal and
//! rule-based lemmatization.
//!
//! Only the ASCII alphabet survives cleaning; accented letters are treated as
//! non-alphabet characters and become separators.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const STOPWORDS_FILE: &str = include_str!("../data/stopwords_en.txt");
pub const LEMMA_EXCEPTIONS_FILE: &str = include_str!("../data/lemma_exceptions.txt");

/// A cleaned, tokenized, stop-word-free and lemmatized document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDoc {
    pub id: String,
    pub tokens: Vec<String>,
}

/// Lowercase, replace every non-ASCII-letter with a space, collapse runs of
/// whitespace and trim.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars() {
        if c.is_ascii_alphabetic() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c.to_ascii_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Split cleaned text on single spaces.
pub fn tokenize(cleaned: &str) -> Vec<String> {
    cleaned
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &HashSet<String>) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// The vendored English stop-word list.
pub fn bundled_stopwords() -> HashSet<String> {
    parse_word_list(STOPWORDS_FILE)
}

/// Suffix-stripping lemmatizer backed by an irregular-form table.
///
/// Rules (first match wins, applied until a fixed point):
/// exception table; keep tokens of length ≤ 3 and tokens ending in
/// `ss`/`us`/`is`; `ies → y`; `sses → ss`; `xes → x`; `zzes → zz`;
/// `ches → ch`; `shes → sh`; trailing `s` stripped.
#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
}

impl Lemmatizer {
    pub fn bundled() -> Self {
        Self::from_table(LEMMA_EXCEPTIONS_FILE)
    }

    /// Build from `"<inflected> <lemma>"` lines; `#` starts a comment line.
    pub fn from_table(text: &str) -> Self {
        let exceptions = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let mut parts = l.split_whitespace();
                Some((parts.next()?.to_string(), parts.next()?.to_string()))
            })
            .collect();
        Lemmatizer { exceptions }
    }

    fn step(&self, token: &str) -> Option<String> {
        if let Some(lemma) = self.exceptions.get(token) {
            return (lemma != token).then(|| lemma.clone());
        }
        if token.len() <= 3 || ["ss", "us", "is"].iter().any(|s| token.ends_with(s)) {
            return None;
        }
        const RULES: [(&str, &str); 6] = [
            ("ies", "y"),
            ("sses", "ss"),
            ("xes", "x"),
            ("zzes", "zz"),
            ("ches", "ch"),
            ("shes", "sh"),
        ];
        for (suffix, replacement) in RULES {
            if let Some(stem) = token.strip_suffix(suffix) {
                if stem.len() >= 2 {
                    return Some(format!("{stem}{replacement}"));
                }
            }
        }
        token.strip_suffix('s').map(str::to_string)
    }

    /// Lemma of a single token. Every rule shortens the token or maps it to a
    /// listed lemma, so iteration terminates.
    pub fn lemma(&self, token: &str) -> String {
        let mut current = token.to_string();
        for _ in 0..token.len() + 2 {
            match self.step(&current) {
                Some(next) => current = next,
                None => break,
            }
        }
        current
    }

    pub fn lemmatize(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().map(|t| self.lemma(t)).collect()
    }
}

/// Lemmatize with the bundled rules and exception table.
pub fn lemmatize(tokens: &[String]) -> Vec<String> {
    Lemmatizer::bundled().lemmatize(tokens)
}

/// The full normalization pipeline with fixed resources.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    stopwords: HashSet<String>,
    lemmatizer: Lemmatizer,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor {
            stopwords: bundled_stopwords(),
            lemmatizer: Lemmatizer::bundled(),
        }
    }
}

impl Preprocessor {
    pub fn new(stopwords: HashSet<String>, lemmatizer: Lemmatizer) -> Self {
        Preprocessor { stopwords, lemmatizer }
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    /// clean → tokenize → drop stop words → lemmatize → drop stop words again
    /// (a lemma can itself be a stop word).
    pub fn tokens(&self, raw: &str) -> Vec<String> {
        let tokens = remove_stopwords(tokenize(&clean_text(raw)), &self.stopwords);
        remove_stopwords(self.lemmatizer.lemmatize(&tokens), &self.stopwords)
    }

    pub fn clean_doc(&self, id: &str, raw: &str) -> CleanDoc {
        CleanDoc {
            id: id.to_string(),
            tokens: self.tokens(raw),
        }
    }
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// SHA-256 of each vendored data file, for provenance output.
pub fn bundled_data_hashes() -> Vec<(&'static str, String)> {
    vec![
        ("stopwords_en.txt", sha256_hex(STOPWORDS_FILE)),
        ("lemma_exceptions.txt", sha256_hex(LEMMA_EXCEPTIONS_FILE)),
    ]
}
