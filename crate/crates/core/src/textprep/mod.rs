//! Text normalization, tokenization, stemming and vocabulary building.
//!
//! The standard chain applied to every record is
//! `normalize -> tokenize -> drop stopwords -> stem`. Stopwords are removed
//! before stemming so a stem can never turn back into a stopword.

mod porter;
mod vocab;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use porter::stem;
pub use vocab::{build_vocab, Vocab, VocabError};

use crate::corpus::Record;

const BUNDLED_STOPWORDS: &str = include_str!("../../../../data/stopwords.txt");
const BUNDLED_QUERY_TERMS: &str = include_str!("../../../../data/query_terms.txt");

/// Literal token that stands in for every link.
pub const URL_TOKEN: &str = "xurl";

/// Ordered, whitespace-free, non-empty tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        Self(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self::new(iter.into_iter().map(Into::into).collect())
    }
}

fn is_scheme_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '+' | '.' | '-')
}

/// Replaces scheme-prefixed links (`https://...`) and bare `t.co/...`
/// links with the url token; a link runs to the next whitespace.
fn replace_urls(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if let Some(start) = url_start(&chars, i) {
            // Drop the scheme characters already copied.
            for _ in start..i {
                out.pop();
            }
            let mut end = i;
            while end < chars.len() && !chars[end].is_whitespace() {
                end += 1;
            }
            out.push(' ');
            out.push_str(URL_TOKEN);
            out.push(' ');
            i = end;
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

/// If a link begins at or just before `i`, returns its first char index.
fn url_start(chars: &[char], i: usize) -> Option<usize> {
    let matches_at = |pat: &str| {
        pat.chars()
            .enumerate()
            .all(|(k, p)| chars.get(i + k) == Some(&p))
    };
    if matches_at("://") {
        let mut start = i;
        while start > 0 && is_scheme_char(chars[start - 1]) {
            start -= 1;
        }
        if start < i && chars[start].is_ascii_alphabetic() {
            return Some(start);
        }
        return None;
    }
    let word_start = i == 0 || !(chars[i - 1].is_alphanumeric() || chars[i - 1] == '.');
    if word_start && matches_at("t.co/") {
        return Some(i);
    }
    None
}

/// Lowercase, substitute links, cap character runs at two, blank out
/// punctuation and control characters, and squeeze whitespace.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let linked = replace_urls(&lowered);

    let mut collapsed = String::with_capacity(linked.len());
    let mut prev = None;
    let mut run = 0;
    for c in linked.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= 2 {
            collapsed.push(c);
        }
    }

    let cleaned: String = collapsed
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokenize(normalized: &str) -> TokenSeq {
    normalized.split_whitespace().collect()
}

/// Share of ASCII characters at or above which text counts as English.
pub const ASCII_RATIO_MIN: f64 = 0.8;

pub fn is_english(text: &str, lang: Option<&str>) -> bool {
    if lang.is_some_and(|l| !l.eq_ignore_ascii_case("en")) {
        return false;
    }
    let total = text.chars().count();
    if total == 0 {
        return true;
    }
    let ascii = text.chars().filter(char::is_ascii).count();
    ascii as f64 >= ASCII_RATIO_MIN * total as f64
}

/// `true` keeps the record.
pub fn drop_non_english(record: &Record) -> bool {
    is_english(&record.text, record.lang.as_deref())
}

/// Stopwords and collection query terms, held in normalized form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterLists {
    pub stopwords: BTreeSet<String>,
    pub query_terms: BTreeSet<String>,
}

impl FilterLists {
    pub fn bundled() -> Self {
        Self::from_lists(BUNDLED_STOPWORDS, BUNDLED_QUERY_TERMS)
    }

    /// One term per line; blank lines and `#` comments ignored.
    pub fn from_lists(stopwords: &str, query_terms: &str) -> Self {
        Self {
            stopwords: parse_term_list(stopwords),
            query_terms: parse_term_list(query_terms),
        }
    }

    pub fn load(stopwords: Option<&Path>, query_terms: Option<&Path>) -> std::io::Result<Self> {
        let stop = match stopwords {
            Some(p) => fs::read_to_string(p)?,
            None => BUNDLED_STOPWORDS.to_string(),
        };
        let query = match query_terms {
            Some(p) => fs::read_to_string(p)?,
            None => BUNDLED_QUERY_TERMS.to_string(),
        };
        Ok(Self::from_lists(&stop, &query))
    }

    /// Stemmed forms of the query terms, matching tokens produced by
    /// [`Preprocessor::tokens`]. A hyphenated term such as `covid-19`
    /// contributes each of its parts.
    pub fn query_stems(&self) -> BTreeSet<String> {
        self.query_terms
            .iter()
            .flat_map(|t| tokenize(&normalize(t)).0)
            .map(|t| stem(&t))
            // a bare "s" stems to nothing
            .filter(|t| !t.is_empty())
            .collect()
    }
}

fn parse_term_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(|l| tokenize(&normalize(l)).0)
        .collect()
}

/// The standard record-to-tokens chain.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    filters: FilterLists,
    query_stems: BTreeSet<String>,
}

impl Preprocessor {
    pub fn new(filters: FilterLists) -> Self {
        let query_stems = filters.query_stems();
        Self {
            filters,
            query_stems,
        }
    }

    pub fn filters(&self) -> &FilterLists {
        &self.filters
    }

    pub fn tokens(&self, text: &str) -> TokenSeq {
        tokenize(&normalize(text))
            .0
            .into_iter()
            .filter(|t| !self.filters.stopwords.contains(t))
            .map(|t| stem(&t))
            // a bare "s" stems to nothing
            .filter(|t| !t.is_empty())
            .collect()
    }

    /// Drops collection keywords from an already processed sequence.
    pub fn strip_query_terms(&self, tokens: &TokenSeq) -> TokenSeq {
        tokens
            .iter()
            .filter(|t| !self.query_stems.contains(*t))
            .collect()
    }
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::new(FilterLists::bundled())
    }
}
