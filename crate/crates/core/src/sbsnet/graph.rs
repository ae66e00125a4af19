use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use crate::textprep::Vocab;

use super::SbsError;

/// Undirected word co-occurrence network over vocabulary ids.
///
/// Nodes are every id seen in the partition, including ones left isolated
/// by edge pruning. Edge keys are stored once as `(lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocGraph {
    window: usize,
    min_edge_weight: u64,
    nodes: Vec<u32>,
    index: HashMap<u32, usize>,
    prevalence: Vec<u64>,
    edges: BTreeMap<(u32, u32), u64>,
    adjacency: Vec<Vec<usize>>,
}

impl CoocGraph {
    pub fn build(docs: &[Vec<u32>], window: usize, min_edge_weight: u64) -> Result<Self, SbsError> {
        if window == 0 {
            return Err(SbsError::InvalidWindow);
        }
        let mut prevalence: BTreeMap<u32, u64> = BTreeMap::new();
        let mut edges: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for doc in docs {
            for (i, &u) in doc.iter().enumerate() {
                *prevalence.entry(u).or_default() += 1;
                for &v in doc.iter().skip(i + 1).take(window) {
                    if u != v {
                        *edges.entry((u.min(v), u.max(v))).or_default() += 1;
                    }
                }
            }
        }
        edges.retain(|_, w| *w >= min_edge_weight);

        let nodes: Vec<u32> = prevalence.keys().copied().collect();
        let index: HashMap<u32, usize> = nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(u, v) in edges.keys() {
            let (a, b) = (index[&u], index[&v]);
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            window,
            min_edge_weight,
            nodes,
            index,
            prevalence: prevalence.into_values().collect(),
            edges,
            adjacency,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn min_edge_weight(&self) -> u64 {
        self.min_edge_weight
    }

    /// Vocabulary ids in ascending order; position is the node index.
    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn edges(&self) -> &BTreeMap<(u32, u32), u64> {
        &self.edges
    }

    pub fn edge_weight(&self, a: u32, b: u32) -> Option<u64> {
        self.edges.get(&(a.min(b), a.max(b))).copied()
    }

    /// Neighbor node indices, sorted.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Raw occurrence counts per node index, taken before pruning.
    pub fn prevalences(&self) -> &[u64] {
        &self.prevalence
    }

    /// Unweighted degree per node index.
    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// One `u v weight` line per edge, tokens spelled out.
    pub fn write_edge_list<W: Write>(&self, vocab: &Vocab, mut out: W) -> io::Result<()> {
        for (&(u, v), w) in &self.edges {
            writeln!(out, "{} {} {}", vocab.token(u), vocab.token(v), w)?;
        }
        Ok(())
    }
}
