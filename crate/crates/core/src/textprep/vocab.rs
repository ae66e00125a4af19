use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TokenSeq;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("min_count must be at least 1")]
    ZeroMinCount,
}

/// Dense token ids ordered by descending frequency, ties lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    freq: Vec<u64>,
    min_count: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    min_count: u64,
    tokens: Vec<String>,
    freq: Vec<u64>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        let ids = r
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            ids,
            tokens: r.tokens,
            freq: r.freq,
            min_count: r.min_count,
        }
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        Self {
            min_count: v.min_count,
            tokens: v.tokens,
            freq: v.freq,
        }
    }
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn freq(&self, id: u32) -> u64 {
        self.freq[id as usize]
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps known tokens to ids, silently dropping the rest.
    pub fn encode(&self, seq: &TokenSeq) -> Vec<u32> {
        seq.iter().filter_map(|t| self.id(t)).collect()
    }
}

pub fn build_vocab(corpus: &[TokenSeq], min_count: u64) -> Result<Vocab, VocabError> {
    if min_count == 0 {
        return Err(VocabError::ZeroMinCount);
    }
    if corpus.iter().all(TokenSeq::is_empty) {
        return Err(VocabError::EmptyCorpus);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for seq in corpus {
        for t in seq.iter() {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let repr = VocabRepr {
        min_count,
        tokens: kept.iter().map(|(t, _)| t.to_string()).collect(),
        freq: kept.iter().map(|&(_, c)| c).collect(),
    };
    Ok(repr.into())
}
