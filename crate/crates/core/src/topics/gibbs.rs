use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TopicError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    /// Symmetric document-topic prior.
    pub alpha: f64,
    /// Symmetric topic-word prior.
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    /// `alpha = 50 / k`, `beta = 0.01`.
    pub fn new(k: usize, iterations: usize, seed: u64) -> Self {
        Self {
            k,
            alpha: 50.0 / k.max(1) as f64,
            beta: 0.01,
            iterations,
            seed,
        }
    }
}

/// Sampler state for one time slice, frozen after fitting.
///
/// `phi_counts` is `k x v` row-major; `theta_counts` is `docs x k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSlice {
    pub slice_index: u32,
    pub k: usize,
    pub v: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub docs: Vec<Vec<u32>>,
    pub assignments: Vec<Vec<u32>>,
    pub phi_counts: Vec<u64>,
    pub topic_totals: Vec<u64>,
    pub theta_counts: Vec<u64>,
}

impl TopicSlice {
    pub fn token_count(&self) -> u64 {
        self.topic_totals.iter().sum()
    }

    pub fn phi_count(&self, topic: usize, word: u32) -> u64 {
        self.phi_counts[topic * self.v + word as usize]
    }

    pub fn theta_count(&self, doc: usize, topic: usize) -> u64 {
        self.theta_counts[doc * self.k + topic]
    }

    /// Smoothed topic-word probability `(n_kw + beta) / (n_k + V beta)`.
    pub fn phi(&self, topic: usize, word: u32) -> f64 {
        (self.phi_count(topic, word) as f64 + self.beta)
            / (self.topic_totals[topic] as f64 + self.v as f64 * self.beta)
    }

    /// Count tables rebuilt from `assignments` alone:
    /// `(phi_counts, topic_totals, theta_counts)`.
    pub fn recount(&self) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
        recount(&self.docs, &self.assignments, self.k, self.v)
    }
}

fn recount(docs: &[Vec<u32>], z: &[Vec<u32>], k: usize, v: usize) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    let mut phi = vec![0u64; k * v];
    let mut totals = vec![0u64; k];
    let mut theta = vec![0u64; docs.len() * k];
    for (d, (doc, zs)) in docs.iter().zip(z).enumerate() {
        for (&w, &t) in doc.iter().zip(zs) {
            let t = t as usize;
            phi[t * v + w as usize] += 1;
            totals[t] += 1;
            theta[d * k + t] += 1;
        }
    }
    (phi, totals, theta)
}

/// Collapsed Gibbs sampler for LDA over one slice.
pub struct GibbsSampler {
    slice: TopicSlice,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

impl GibbsSampler {
    /// Seeds the assignments: uniformly at random, or from `init`'s smoothed
    /// topic-word distributions when chaining from a previous slice.
    pub fn new(
        docs: Vec<Vec<u32>>,
        v: usize,
        params: &LdaParams,
        init: Option<&TopicSlice>,
        slice_index: u32,
    ) -> Result<Self, TopicError> {
        if params.k == 0 {
            return Err(TopicError::InvalidK);
        }
        let tokens: usize = docs.iter().map(Vec::len).sum();
        if tokens == 0 {
            return Err(TopicError::EmptySlice);
        }
        if params.k > tokens {
            return Err(TopicError::OverParameterized { k: params.k, tokens });
        }
        if let Some(&w) = docs.iter().flatten().find(|&&w| w as usize >= v) {
            return Err(TopicError::WordOutOfRange { word: w, v });
        }
        if let Some(prev) = init {
            if prev.k != params.k || prev.v != v {
                return Err(TopicError::IncompatibleInit {
                    prev_k: prev.k,
                    prev_v: prev.v,
                    k: params.k,
                    v,
                });
            }
        }

        let k = params.k;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut weights = vec![0.0; k];
        let assignments: Vec<Vec<u32>> = docs
            .iter()
            .map(|doc| {
                doc.iter()
                    .map(|&w| match init {
                        Some(prev) => {
                            for (t, wt) in weights.iter_mut().enumerate() {
                                *wt = prev.phi(t, w);
                            }
                            draw(&mut rng, &weights) as u32
                        }
                        None => rng.random_range(0..k as u32),
                    })
                    .collect()
            })
            .collect();
        let (phi_counts, topic_totals, theta_counts) = recount(&docs, &assignments, k, v);
        Ok(Self {
            slice: TopicSlice {
                slice_index,
                k,
                v,
                alpha: params.alpha,
                beta: params.beta,
                seed: params.seed,
                docs,
                assignments,
                phi_counts,
                topic_totals,
                theta_counts,
            },
            rng,
            weights,
        })
    }

    /// One full pass resampling every token's topic.
    pub fn sweep(&mut self) {
        let s = &mut self.slice;
        let (k, v) = (s.k, s.v);
        let vbeta = v as f64 * s.beta;
        for d in 0..s.docs.len() {
            for i in 0..s.docs[d].len() {
                let w = s.docs[d][i] as usize;
                let old = s.assignments[d][i] as usize;
                s.phi_counts[old * v + w] -= 1;
                s.topic_totals[old] -= 1;
                s.theta_counts[d * k + old] -= 1;

                for t in 0..k {
                    self.weights[t] = (s.theta_counts[d * k + t] as f64 + s.alpha)
                        * (s.phi_counts[t * v + w] as f64 + s.beta)
                        / (s.topic_totals[t] as f64 + vbeta);
                }
                let new = draw(&mut self.rng, &self.weights);

                s.assignments[d][i] = new as u32;
                s.phi_counts[new * v + w] += 1;
                s.topic_totals[new] += 1;
                s.theta_counts[d * k + new] += 1;
            }
        }
    }

    pub fn state(&self) -> &TopicSlice {
        &self.slice
    }

    /// Checks the stored tables against a recount and their marginal identities.
    pub fn verify_counts(&self) -> Result<(), String> {
        let s = &self.slice;
        let (phi, totals, theta) = s.recount();
        if phi != s.phi_counts || totals != s.topic_totals || theta != s.theta_counts {
            return Err("count tables diverge from assignments".into());
        }
        let n: usize = s.docs.iter().map(Vec::len).sum();
        if s.token_count() as usize != n {
            return Err(format!("topic totals sum {} != tokens {n}", s.token_count()));
        }
        for t in 0..s.k {
            let row: u64 = s.phi_counts[t * s.v..(t + 1) * s.v].iter().sum();
            if row != s.topic_totals[t] {
                return Err(format!("topic {t}: word counts {row} != total {}", s.topic_totals[t]));
            }
        }
        for (d, doc) in s.docs.iter().enumerate() {
            let row: u64 = s.theta_counts[d * s.k..(d + 1) * s.k].iter().sum();
            if row as usize != doc.len() {
                return Err(format!("doc {d}: topic counts {row} != length {}", doc.len()));
            }
        }
        if s.assignments.iter().flatten().any(|&z| z as usize >= s.k) {
            return Err("assignment out of range".into());
        }
        Ok(())
    }

    pub fn into_slice(self) -> TopicSlice {
        self.slice
    }
}

/// Runs `params.iterations` sweeps from a fresh or chained start.
pub fn fit_slice(
    docs: Vec<Vec<u32>>,
    v: usize,
    params: &LdaParams,
    init: Option<&TopicSlice>,
    slice_index: u32,
) -> Result<TopicSlice, TopicError> {
    let mut sampler = GibbsSampler::new(docs, v, params, init, slice_index)?;
    for _ in 0..params.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs() -> Vec<Vec<u32>> {
        vec![vec![0, 1, 2, 0], vec![3, 4], vec![1, 1, 4, 2, 0]]
    }

    #[test]
    fn single_topic_takes_everything() {
        let s = fit_slice(docs(), 5, &LdaParams::new(1, 10, 1), None, 0).unwrap();
        assert!(s.assignments.iter().flatten().all(|&z| z == 0));
        // smoothed relative frequency: (n_w + beta) / (N + V beta)
        let n = 11.0;
        let expected0 = (3.0 + 0.01) / (n + 5.0 * 0.01);
        assert!((s.phi(0, 0) - expected0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_for_seed() {
        let p = LdaParams::new(3, 20, 42);
        let a = fit_slice(docs(), 5, &p, None, 0).unwrap();
        let b = fit_slice(docs(), 5, &p, None, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn counts_conserved_each_sweep() {
        let mut s = GibbsSampler::new(docs(), 5, &LdaParams::new(3, 0, 9), None, 0).unwrap();
        s.verify_counts().unwrap();
        for _ in 0..25 {
            s.sweep();
            s.verify_counts().unwrap();
        }
        let slice = s.into_slice();
        assert_eq!(slice.recount(), (slice.phi_counts.clone(), slice.topic_totals.clone(), slice.theta_counts.clone()));
    }

    #[test]
    fn error_cases() {
        assert!(matches!(
            fit_slice(vec![vec![0, 1]], 2, &LdaParams::new(3, 1, 0), None, 0),
            Err(TopicError::OverParameterized { k: 3, tokens: 2 })
        ));
        assert!(matches!(
            fit_slice(vec![vec![]], 2, &LdaParams::new(1, 1, 0), None, 0),
            Err(TopicError::EmptySlice)
        ));
        assert!(matches!(
            fit_slice(vec![vec![0]], 2, &LdaParams::new(0, 1, 0), None, 0),
            Err(TopicError::InvalidK)
        ));
        assert!(matches!(
            fit_slice(vec![vec![7]], 2, &LdaParams::new(1, 1, 0), None, 0),
            Err(TopicError::WordOutOfRange { word: 7, v: 2 })
        ));
        let prev = fit_slice(docs(), 5, &LdaParams::new(2, 1, 0), None, 0).unwrap();
        assert!(matches!(
            fit_slice(docs(), 6, &LdaParams::new(2, 1, 0), Some(&prev), 1),
            Err(TopicError::IncompatibleInit { .. })
        ));
    }

    #[test]
    fn chained_init_follows_previous_topics() {
        // Previous slice puts word 0 entirely in topic 1 and word 1 in topic 0.
        let prev = TopicSlice {
            slice_index: 0,
            k: 2,
            v: 2,
            alpha: 1.0,
            beta: 1e-6,
            seed: 0,
            docs: vec![vec![0, 1]],
            assignments: vec![vec![1, 0]],
            phi_counts: vec![0, 1000, 1000, 0],
            topic_totals: vec![1000, 1000],
            theta_counts: vec![1, 1],
        };
        let s = GibbsSampler::new(vec![vec![0, 0, 1, 1, 0]], 2, &LdaParams::new(2, 0, 3), Some(&prev), 1)
            .unwrap();
        assert_eq!(s.state().assignments, vec![vec![1, 1, 0, 0, 1]]);
    }
}
