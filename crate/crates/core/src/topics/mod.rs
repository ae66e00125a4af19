//! Week-sliced topic models chained through time.
//!
//! Each slice is an LDA model fit by collapsed Gibbs sampling. Slices after
//! the first start from the previous slice's smoothed topic-word
//! distributions, so topic `k` in week `s + 1` continues topic `k` of week
//! `s`.

mod gibbs;

use std::collections::HashSet;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gibbs::{fit_slice, GibbsSampler, LdaParams, TopicSlice};

use crate::textprep::Vocab;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopicError {
    #[error("topic count must be at least 1")]
    InvalidK,
    #[error("slice has no tokens")]
    EmptySlice,
    #[error("{k} topics exceed the {tokens} tokens available")]
    OverParameterized { k: usize, tokens: usize },
    #[error("word id {word} outside vocabulary of size {v}")]
    WordOutOfRange { word: u32, v: usize },
    #[error("previous slice has k={prev_k}, v={prev_v}; this slice needs k={k}, v={v}")]
    IncompatibleInit {
        prev_k: usize,
        prev_v: usize,
        k: usize,
        v: usize,
    },
    #[error("every week is empty")]
    EmptyCorpus,
    #[error("topic {topic} out of range for k={k}")]
    NoSuchTopic { topic: usize, k: usize },
    #[error("coherence needs top_k >= 2")]
    TopKTooSmall,
    #[error("top term `{0}` never occurs in the reference documents")]
    TermAbsent(String),
}

/// Fitted slices for every non-empty week, in week order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicChain {
    pub slices: Vec<TopicSlice>,
    /// Weeks skipped for having no tokens.
    pub gaps: Vec<u32>,
}

/// Fits week 0 from scratch and every later non-empty week from the last
/// fitted slice. Slice `i` (counting fitted slices) uses seed `seed + i`.
pub fn chain(weeks: &[(u32, Vec<Vec<u32>>)], v: usize, params: &LdaParams) -> Result<TopicChain, TopicError> {
    let mut slices: Vec<TopicSlice> = Vec::new();
    let mut gaps = Vec::new();
    for (week, docs) in weeks {
        let docs: Vec<Vec<u32>> = docs.iter().filter(|d| !d.is_empty()).cloned().collect();
        if docs.is_empty() {
            gaps.push(*week);
            continue;
        }
        let slice_params = LdaParams {
            seed: params.seed.wrapping_add(slices.len() as u64),
            ..*params
        };
        let slice = fit_slice(docs, v, &slice_params, slices.last(), *week)?;
        slices.push(slice);
    }
    if slices.is_empty() {
        return Err(TopicError::EmptyCorpus);
    }
    Ok(TopicChain { slices, gaps })
}

/// Terms of `topic` ranked by smoothed probability, ties lexicographic.
pub fn top_terms(slice: &TopicSlice, vocab: &Vocab, topic: usize, k: usize) -> Result<Vec<(String, f64)>, TopicError> {
    Ok(top_ids(slice, vocab, topic, k)?
        .into_iter()
        .map(|(id, w)| (vocab.token(id).to_string(), w))
        .collect())
}

fn top_ids(slice: &TopicSlice, vocab: &Vocab, topic: usize, k: usize) -> Result<Vec<(u32, f64)>, TopicError> {
    if topic >= slice.k {
        return Err(TopicError::NoSuchTopic { topic, k: slice.k });
    }
    let mut ranked: Vec<(u32, f64)> = (0..slice.v as u32).map(|w| (w, slice.phi(topic, w))).collect();
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| vocab.token(a.0).cmp(vocab.token(b.0)))
    });
    ranked.truncate(k);
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub week: u32,
    /// Fraction of the week's tokens assigned to each topic.
    pub shares: Vec<f64>,
}

pub fn topic_share_series(chain: &TopicChain) -> Vec<ShareRow> {
    chain
        .slices
        .iter()
        .map(|s| {
            let total = s.token_count() as f64;
            ShareRow {
                week: s.slice_index,
                shares: s.topic_totals.iter().map(|&n| n as f64 / total).collect(),
            }
        })
        .collect()
}

pub fn write_share_csv<W: Write>(rows: &[ShareRow], mut out: W) -> io::Result<()> {
    writeln!(out, "week,topic,share")?;
    for row in rows {
        for (t, s) in row.shares.iter().enumerate() {
            writeln!(out, "{},{t},{s}", row.week)?;
        }
    }
    Ok(())
}

/// UMass coherence of a topic's `top_k` terms against `docs`:
/// `sum_{i > j} ln((D(w_i, w_j) + 1) / D(w_j))`, where `w_j` outranks `w_i`
/// and `D` counts documents.
pub fn coherence(slice: &TopicSlice, docs: &[Vec<u32>], vocab: &Vocab, topic: usize, top_k: usize) -> Result<f64, TopicError> {
    if top_k < 2 {
        return Err(TopicError::TopKTooSmall);
    }
    let top: Vec<u32> = top_ids(slice, vocab, topic, top_k)?.into_iter().map(|(w, _)| w).collect();
    let doc_sets: Vec<HashSet<u32>> = docs.iter().map(|d| d.iter().copied().collect()).collect();
    let df = |w: u32| doc_sets.iter().filter(|s| s.contains(&w)).count();
    let co_df = |a: u32, b: u32| doc_sets.iter().filter(|s| s.contains(&a) && s.contains(&b)).count();

    let mut score = 0.0;
    for i in 1..top.len() {
        for j in 0..i {
            let dj = df(top[j]);
            if dj == 0 {
                return Err(TopicError::TermAbsent(vocab.token(top[j]).to_string()));
            }
            score += ((co_df(top[i], top[j]) + 1) as f64 / dj as f64).ln();
        }
    }
    Ok(score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicExport {
    pub topic: usize,
    pub coherence: Option<f64>,
    pub terms: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceExport {
    pub week: u32,
    pub tokens: u64,
    pub topics: Vec<TopicExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainExport {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gaps: Vec<u32>,
    pub slices: Vec<SliceExport>,
}

/// Top terms and coherence for every slice and topic. Coherence is taken
/// against each slice's own documents and left out when it is undefined.
pub fn export_chain(chain: &TopicChain, vocab: &Vocab, top_k: usize) -> ChainExport {
    let first = &chain.slices[0];
    let slices = chain
        .slices
        .iter()
        .map(|s| SliceExport {
            week: s.slice_index,
            tokens: s.token_count(),
            topics: (0..s.k)
                .map(|t| TopicExport {
                    topic: t,
                    coherence: coherence(s, &s.docs, vocab, t, top_k).ok(),
                    terms: top_terms(s, vocab, t, top_k).expect("topic in range"),
                })
                .collect(),
        })
        .collect();
    ChainExport {
        k: first.k,
        alpha: first.alpha,
        beta: first.beta,
        gaps: chain.gaps.clone(),
        slices,
    }
}
