//! Bundled closed-vocabulary corpora for the review and keyword tasks, and a
//! backend that answers their per-item prompts exactly.

use std::path::Path;
use std::sync::LazyLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Payload;
use crate::backends::{Backend, BackendError, Completion, OracleBackend};
use crate::runtime::parse_list;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub text: String,
    pub label: Sentiment,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: review text may not contain double quotes")]
    QuotedText { line: usize },
}

fn parse_reviews(text: &str) -> Result<Vec<Review>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let review: Review = serde_json::from_str(line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        if review.text.contains('"') {
            return Err(CorpusError::QuotedText { line: i + 1 });
        }
        out.push(review);
    }
    Ok(out)
}

/// Reads a user-supplied JSON Lines corpus of `{text, label}` records.
pub fn load_reviews(path: impl AsRef<Path>) -> Result<Vec<Review>, CorpusError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_reviews(&text)
}

static YELP: LazyLock<Vec<Review>> =
    LazyLock::new(|| parse_reviews(include_str!("../../assets/corpora/yelp.jsonl")).expect("bundled corpus parses"));

static COUNTRIES: LazyLock<Vec<&'static str>> = LazyLock::new(|| {
    include_str!("../../assets/corpora/countries.txt").lines().map(str::trim).filter(|l| !l.is_empty()).collect()
});

static TEMPLATES: LazyLock<Vec<&'static str>> = LazyLock::new(|| {
    include_str!("../../assets/corpora/keyword_templates.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect()
});

static COUNTRY_RE: LazyLock<Regex> = LazyLock::new(|| {
    let mut names: Vec<&str> = COUNTRIES.clone();
    names.sort_by_key(|n| std::cmp::Reverse(n.len()));
    let alternation: Vec<String> = names.iter().map(|n| regex::escape(n)).collect();
    Regex::new(&format!(r"\b(?:{})\b", alternation.join("|"))).expect("country regex")
});

pub fn yelp_corpus() -> &'static [Review] {
    &YELP
}

pub fn countries() -> &'static [&'static str] {
    &COUNTRIES
}

const POSITIVE_WORDS: &[&str] = &[
    "amazing",
    "attentive",
    "best",
    "cozy",
    "delicious",
    "excellent",
    "fantastic",
    "fresh",
    "friendly",
    "great",
    "loved",
    "perfect",
    "pleasant",
    "recommend",
    "tasty",
    "wonderful",
];
const NEGATIVE_WORDS: &[&str] = &[
    "awful",
    "bland",
    "burnt",
    "cold",
    "dirty",
    "disappointing",
    "horrible",
    "overpriced",
    "rude",
    "slow",
    "soggy",
    "stale",
    "terrible",
    "worst",
    "wrong",
];

/// Lexicon vote; ties count as negative.
pub fn classify_sentiment(text: &str) -> Sentiment {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    let score = |lexicon: &[&str]| words.iter().filter(|w| lexicon.contains(w)).count();
    if score(POSITIVE_WORDS) > score(NEGATIVE_WORDS) {
        Sentiment::Positive
    } else {
        Sentiment::Negative
    }
}

/// Splits after each `.`, `!` or `?` that ends a sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            let sentence = current.trim();
            if !sentence.is_empty() {
                out.push(sentence.to_string());
            }
            current.clear();
        }
    }
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    out
}

/// Country names from the bundled list, in order of appearance.
pub fn extract_countries(text: &str) -> Vec<String> {
    COUNTRY_RE.find_iter(text).map(|m| m.as_str().to_string()).collect()
}

pub(super) fn generate_article(rng: &mut ChaCha8Rng, sentences: usize) -> Payload {
    let mut out = Vec::with_capacity(sentences);
    let mut mentions = Vec::new();
    for _ in 0..sentences {
        let template = TEMPLATES[rng.random_range(0..TEMPLATES.len())];
        let mut sentence = String::new();
        let mut pieces = template.split("{}").peekable();
        while let Some(piece) = pieces.next() {
            sentence.push_str(piece);
            if pieces.peek().is_some() {
                let country = COUNTRIES[rng.random_range(0..COUNTRIES.len())];
                sentence.push_str(country);
                mentions.push(country.to_string());
            }
        }
        out.push(sentence);
    }
    Payload::Keyword { sentences: out, mentions }
}

fn quoted_list(items: &[String], quote: char) -> String {
    let parts: Vec<String> = items.iter().map(|s| format!("{quote}{s}{quote}")).collect();
    format!("[{}]", parts.join(", "))
}

/// The elementary-operation oracle extended with exact answers for the
/// review-sentiment, sentence-split, country-extraction and counting prompts
/// of the bundled corpora.
#[derive(Debug, Clone, Copy, Default)]
pub struct CorpusBackend {
    oracle: OracleBackend,
}

impl CorpusBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn answer(&self, prompt: &str) -> Result<String, BackendError> {
        static SENTIMENT: LazyLock<Regex> =
            LazyLock::new(|| Regex::new(r"^Check the following review is Positive or Negative: (.*)$").expect("regex"));
        static COUNT: LazyLock<Regex> =
            LazyLock::new(|| Regex::new(r"^(\[.*\]), output the number of Positive\.$").expect("regex"));
        static SPLIT: LazyLock<Regex> = LazyLock::new(|| {
            Regex::new(r"^Split the following article into sentences: '(.*)'\. Output an array\.$").expect("regex")
        });
        static EXTRACT: LazyLock<Regex> = LazyLock::new(|| {
            Regex::new(r#"^Extract all country names \(no continents\) in the order of their appearance from the following sentence \(repeated is allowed\): "(.*)" Output \[\] if not exist any country\.$"#)
                .expect("regex")
        });

        let p = prompt.split_whitespace().collect::<Vec<_>>().join(" ");
        if let Some(c) = SENTIMENT.captures(&p) {
            return Ok(match classify_sentiment(&c[1]) {
                Sentiment::Positive => "Positive",
                Sentiment::Negative => "Negative",
            }
            .to_string());
        }
        if let Some(c) = COUNT.captures(&p) {
            let n = parse_list(&c[1]).iter().filter(|s| s.eq_ignore_ascii_case("positive")).count();
            return Ok(n.to_string());
        }
        if let Some(c) = SPLIT.captures(&p) {
            return Ok(quoted_list(&split_sentences(&c[1]), '"'));
        }
        if let Some(c) = EXTRACT.captures(&p) {
            return Ok(quoted_list(&extract_countries(&c[1]), '\''));
        }
        self.oracle.answer(prompt)
    }
}

impl Backend for CorpusBackend {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        self.answer(prompt).map(|text| Completion::estimated(prompt, text))
    }

    fn label(&self) -> String {
        "corpus".to_string()
    }
}
