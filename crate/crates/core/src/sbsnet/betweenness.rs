//! Exact betweenness for undirected, unweighted graphs (Brandes).
//!
//! Path length is the hop count. Each unordered endpoint pair `{j, k}`
//! contributes `paths through v / all shortest paths`; unreachable pairs
//! contribute nothing.

use std::collections::VecDeque;

use rayon::prelude::*;

/// Sources per parallel work unit. Partial sums are combined in chunk
/// order, so the result does not depend on the thread count.
const SOURCE_CHUNK: usize = 32;

pub fn betweenness(adjacency: &[Vec<usize>]) -> Vec<f64> {
    let n = adjacency.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut scratch = Scratch::new(n);
            for &s in chunk {
                scratch.accumulate(adjacency, s, &mut acc);
            }
            acc
        })
        .collect();

    let mut total = vec![0.0; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    // every unordered pair was visited from both ends
    for t in &mut total {
        *t /= 2.0;
    }
    total
}

struct Scratch {
    order: Vec<usize>,
    preds: Vec<Vec<usize>>,
    sigma: Vec<f64>,
    dist: Vec<i64>,
    delta: Vec<f64>,
    queue: VecDeque<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            order: Vec::with_capacity(n),
            preds: vec![Vec::new(); n],
            sigma: vec![0.0; n],
            dist: vec![-1; n],
            delta: vec![0.0; n],
            queue: VecDeque::with_capacity(n),
        }
    }

    fn accumulate(&mut self, adjacency: &[Vec<usize>], s: usize, acc: &mut [f64]) {
        self.order.clear();
        for p in &mut self.preds {
            p.clear();
        }
        self.sigma.fill(0.0);
        self.dist.fill(-1);
        self.delta.fill(0.0);

        self.sigma[s] = 1.0;
        self.dist[s] = 0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            for &w in &adjacency[v] {
                if self.dist[w] < 0 {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                    self.preds[w].push(v);
                }
            }
        }

        while let Some(w) = self.order.pop() {
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for &v in &self.preds[w] {
                self.delta[v] += self.sigma[v] * coeff;
            }
            if w != s {
                acc[w] += self.delta[w];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    #[test]
    fn path_graph() {
        let b = betweenness(&undirected(3, &[(0, 1), (1, 2)]));
        assert_eq!(b, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn triangle_is_all_zero() {
        let b = betweenness(&undirected(3, &[(0, 1), (1, 2), (0, 2)]));
        assert_eq!(b, vec![0.0; 3]);
    }

    #[test]
    fn star_center() {
        for leaves in 1..8usize {
            let edges: Vec<_> = (1..=leaves).map(|l| (0, l)).collect();
            let b = betweenness(&undirected(leaves + 1, &edges));
            assert_eq!(b[0], (leaves * (leaves - 1) / 2) as f64);
            assert!(b[1..].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn square_splits_paths() {
        // 0-1-2-3-0: opposite corners have two shortest paths each
        let b = betweenness(&undirected(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]));
        assert_eq!(b, vec![0.5; 4]);
    }

    #[test]
    fn disconnected_components() {
        let b = betweenness(&undirected(6, &[(0, 1), (1, 2), (3, 4), (4, 5)]));
        assert_eq!(b, vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
    }
}
