//! Semantic Brand Score over word co-occurrence networks.
//!
//! For each word node: prevalence (raw mentions), diversity (degree) and
//! connectivity (betweenness). The score is the sum of the three
//! population z-scores taken over every node in the partition.

mod betweenness;
mod graph;

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use betweenness::betweenness;
pub use graph::CoocGraph;

use crate::corpus::LocationCode;
use crate::textprep::Vocab;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SbsError {
    #[error("co-occurrence window must be at least 1")]
    InvalidWindow,
    #[error("partition has {0} node(s); at least 2 are needed to standardize")]
    DegeneratePartition(usize),
    #[error("watchlist is empty")]
    EmptyWatchlist,
}

/// A measurement that may refer to a word missing from the graph; such
/// lookups yield zero with `missing` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub missing: bool,
}

impl<T> Flagged<T> {
    fn found(value: T) -> Self {
        Self {
            value,
            missing: false,
        }
    }
}

impl<T: Default> Flagged<T> {
    fn absent() -> Self {
        Self {
            value: T::default(),
            missing: true,
        }
    }
}

/// Occurrences (not documents) of `word` across the partition.
pub fn prevalence(word: &str, vocab: &Vocab, graph: &CoocGraph) -> Flagged<u64> {
    match vocab.id(word).and_then(|id| graph.node_index(id)) {
        Some(i) => Flagged::found(graph.prevalences()[i]),
        None => Flagged::absent(),
    }
}

/// Number of distinct neighbours.
pub fn diversity(word: &str, vocab: &Vocab, graph: &CoocGraph) -> Flagged<usize> {
    match vocab.id(word).and_then(|id| graph.node_index(id)) {
        Some(i) => Flagged::found(graph.neighbors(i).len()),
        None => Flagged::absent(),
    }
}

/// Betweenness of the word's node. Computes the whole graph; use [`sbs`]
/// when scoring many words.
pub fn connectivity(word: &str, vocab: &Vocab, graph: &CoocGraph) -> Flagged<f64> {
    match vocab.id(word).and_then(|id| graph.node_index(id)) {
        Some(i) => Flagged::found(betweenness(graph.adjacency())[i]),
        None => Flagged::absent(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbsComponents {
    pub word: String,
    pub prev: u64,
    pub div: usize,
    pub con: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbsScore {
    pub components: SbsComponents,
    pub z_prev: f64,
    pub z_div: f64,
    pub z_con: f64,
    pub sbs: f64,
}

impl SbsScore {
    pub fn word(&self) -> &str {
        &self.components.word
    }
}

/// Standard deviations at or below this fraction of the mean's magnitude
/// (floored at 1) are treated as zero: the summation noise of a constant
/// column must not be blown up into unit-variance scores.
const STD_ZERO_REL: f64 = 1e-12;

/// Population z-scores; a constant column maps to all zeros.
pub fn z_scores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= STD_ZERO_REL * mean.abs().max(1.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Scores every node of the graph, in node order.
pub fn sbs(graph: &CoocGraph, vocab: &Vocab) -> Result<Vec<SbsScore>, SbsError> {
    let n = graph.node_count();
    if n < 2 {
        return Err(SbsError::DegeneratePartition(n));
    }
    let components: Vec<SbsComponents> = graph
        .nodes()
        .iter()
        .zip(graph.prevalences())
        .zip(graph.degrees())
        .zip(betweenness(graph.adjacency()))
        .map(|(((&id, &prev), div), con)| SbsComponents {
            word: vocab.token(id).to_string(),
            prev,
            div,
            con,
        })
        .collect();
    Ok(score_components(components))
}

/// Standardizes already measured components.
pub fn score_components(components: Vec<SbsComponents>) -> Vec<SbsScore> {
    let zp = z_scores(&components.iter().map(|c| c.prev as f64).collect::<Vec<_>>());
    let zd = z_scores(&components.iter().map(|c| c.div as f64).collect::<Vec<_>>());
    let zc = z_scores(&components.iter().map(|c| c.con).collect::<Vec<_>>());
    components
        .into_iter()
        .enumerate()
        .map(|(i, c)| SbsScore {
            components: c,
            z_prev: zp[i],
            z_div: zd[i],
            z_con: zc[i],
            sbs: zp[i] + zd[i] + zc[i],
        })
        .collect()
}

/// A week, optionally narrowed to one location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartitionKey {
    pub week: u32,
    pub location: Option<LocationCode>,
}

impl fmt::Display for PartitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Some(loc) => write!(f, "w{}:{}", self.week, loc),
            None => write!(f, "w{}", self.week),
        }
    }
}

/// Documents (as vocabulary ids) belonging to one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub key: PartitionKey,
    pub docs: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SbsParams {
    pub window: usize,
    pub min_edge_weight: u64,
}

impl Default for SbsParams {
    fn default() -> Self {
        Self {
            window: 5,
            min_edge_weight: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionOutcome {
    /// One entry per watchlist word; `None` when the word is not a node.
    Scored(Vec<Option<SbsScore>>),
    /// Fewer than two nodes; nothing can be standardized.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbsSeries {
    pub watchlist: Vec<String>,
    pub rows: Vec<(PartitionKey, PartitionOutcome)>,
}

impl SbsSeries {
    /// The series for one word, `None` where it is absent or the partition degenerate.
    pub fn word_series(&self, word: &str) -> Option<Vec<(PartitionKey, Option<f64>)>> {
        let idx = self.watchlist.iter().position(|w| w == word)?;
        Some(
            self.rows
                .iter()
                .map(|(key, outcome)| {
                    let v = match outcome {
                        PartitionOutcome::Scored(scores) => scores[idx].as_ref().map(|s| s.sbs),
                        PartitionOutcome::Degenerate => None,
                    };
                    (*key, v)
                })
                .collect(),
        )
    }

    /// `partition,word,prev,div,con,z_prev,z_div,z_con,sbs`; nulls as empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "partition,word,prev,div,con,z_prev,z_div,z_con,sbs")?;
        for (key, outcome) in &self.rows {
            for (i, word) in self.watchlist.iter().enumerate() {
                let score = match outcome {
                    PartitionOutcome::Scored(s) => s[i].as_ref(),
                    PartitionOutcome::Degenerate => None,
                };
                match score {
                    Some(s) => writeln!(
                        out,
                        "{key},{word},{},{},{},{},{},{},{}",
                        s.components.prev,
                        s.components.div,
                        s.components.con,
                        s.z_prev,
                        s.z_div,
                        s.z_con,
                        s.sbs
                    )?,
                    None => writeln!(out, "{key},{word},,,,,,,")?,
                }
            }
        }
        Ok(())
    }
}

/// Builds one graph per partition and looks up each watchlist word.
pub fn sbs_series(
    partitions: &[Partition],
    vocab: &Vocab,
    watchlist: &[String],
    params: SbsParams,
) -> Result<SbsSeries, SbsError> {
    if watchlist.is_empty() {
        return Err(SbsError::EmptyWatchlist);
    }
    let mut rows = Vec::with_capacity(partitions.len());
    for part in partitions {
        let graph = CoocGraph::build(&part.docs, params.window, params.min_edge_weight)?;
        let outcome = match sbs(&graph, vocab) {
            Ok(scores) => PartitionOutcome::Scored(
                watchlist
                    .iter()
                    .map(|w| {
                        vocab
                            .id(w)
                            .and_then(|id| graph.node_index(id))
                            .map(|i| scores[i].clone())
                    })
                    .collect(),
            ),
            Err(SbsError::DegeneratePartition(_)) => PartitionOutcome::Degenerate,
            Err(e) => return Err(e),
        };
        rows.push((part.key, outcome));
    }
    Ok(SbsSeries {
        watchlist: watchlist.to_vec(),
        rows,
    })
}
