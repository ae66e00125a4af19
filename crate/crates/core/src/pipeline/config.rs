use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::corpus::{default_epoch, Granularity, InputFormat};
use crate::sentiment::TrainConfig;

/// Everything a run depends on. Every field has a default, so a config file
/// only needs the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Tweet file; default `tweets.jsonl`.
    pub input: PathBuf,
    /// `jsonl` (default) or `csv`.
    pub format: InputFormat,
    /// Ordered `pattern,code` table; the bundled Australian table when unset.
    pub gazetteer: Option<PathBuf>,
    /// One word per line; bundled list when unset.
    pub stopwords: Option<PathBuf>,
    /// Collection keywords removed before topic, term and network analysis;
    /// bundled list when unset.
    pub query_terms: Option<PathBuf>,
    /// Start of bucket 0; default 2019-11-27.
    pub epoch: NaiveDate,
    /// `week` (default) or `day`.
    pub granularity: Granularity,
    /// Minimum corpus frequency for a vocabulary entry; default 2.
    pub min_count: u64,
    /// Optional `week,value` series correlated with weekly volume.
    pub cases: Option<PathBuf>,
    /// Terms listed in the term cloud; default 50.
    pub term_cloud_k: usize,
    /// Bundle directory; default `report`.
    pub output_dir: PathBuf,
    pub sentiment: SentimentSection,
    pub topics: TopicsSection,
    pub sbs: SbsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SentimentSection {
    /// Directory holding `model.bin`, `model.json` and `vocab.json` from an
    /// earlier run. When set, training is skipped and this model scores.
    pub model: Option<PathBuf>,
    /// Share of labeled records held out for model selection; default 0.1.
    pub val_fraction: f64,
    pub train: TrainConfig,
}

impl Default for SentimentSection {
    fn default() -> Self {
        Self { model: None, val_fraction: 0.1, train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsSection {
    /// Topics per week; default 3.
    pub k: usize,
    /// Document-topic prior; `50 / k` when unset.
    pub alpha: Option<f64>,
    /// Topic-word prior; default 0.01.
    pub beta: f64,
    /// Gibbs sweeps per week; default 50.
    pub iterations: usize,
    pub seed: u64,
    /// Terms reported per topic; default 10.
    pub top_k: usize,
}

impl Default for TopicsSection {
    fn default() -> Self {
        Self { k: 3, alpha: None, beta: 0.01, iterations: 50, seed: 1, top_k: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbsSection {
    /// Co-occurrence window in tokens; default 5.
    pub window: usize,
    /// Edges lighter than this are pruned; default 2.
    pub min_edge_weight: u64,
    /// Words to track; preprocessed like tweet text before lookup.
    pub watchlist: Vec<String>,
    /// Also score every week x location partition.
    pub by_location: bool,
}

impl Default for SbsSection {
    fn default() -> Self {
        Self {
            window: 5,
            min_edge_weight: 2,
            watchlist: ["china", "case", "home", "hand", "toilet", "spread"].map(String::from).to_vec(),
            by_location: false,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("tweets.jsonl"),
            format: InputFormat::Jsonl,
            gazetteer: None,
            stopwords: None,
            query_terms: None,
            epoch: default_epoch(),
            granularity: Granularity::Week,
            min_count: 2,
            cases: None,
            term_cloud_k: 50,
            output_dir: PathBuf::from("report"),
            sentiment: SentimentSection::default(),
            topics: TopicsSection::default(),
            sbs: SbsSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Digest of the analysis settings. The output directory is left out so
    /// that identical runs written to different places hash alike.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.min_count == 0 {
            return bad("min_count must be at least 1");
        }
        if self.topics.k == 0 {
            return bad("topics.k must be at least 1");
        }
        if self.topics.beta <= 0.0 || self.topics.alpha.is_some_and(|a| a <= 0.0) {
            return bad("topic priors must be positive");
        }
        if self.sbs.window == 0 {
            return bad("sbs.window must be at least 1");
        }
        if self.sbs.watchlist.is_empty() {
            return bad("sbs.watchlist is empty");
        }
        if !(0.0..1.0).contains(&self.sentiment.val_fraction) {
            return bad("sentiment.val_fraction must lie in [0, 1)");
        }
        let t = &self.sentiment.train;
        if t.batch_size == 0 || t.epochs == 0 {
            return bad("sentiment.train needs positive epochs and batch_size");
        }
        if t.learning_rate < 0.0 || !(0.0..1.0).contains(&t.momentum) {
            return bad("sentiment.train learning_rate must be >= 0 and momentum in [0, 1)");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn customized_round_trips() {
        let mut c = PipelineConfig { cases: Some("cases.csv".into()), ..PipelineConfig::default() };
        c.sentiment.model = Some("models/run1".into());
        c.topics.alpha = Some(0.5);
        c.granularity = Granularity::Day;
        c.format = InputFormat::Csv;
        c.sbs.watchlist = vec!["mask".into()];
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = PipelineConfig::from_toml("input = \"x.csv\"\nformat = \"csv\"\n[topics]\nk = 5\n").unwrap();
        assert_eq!(c.topics.k, 5);
        assert_eq!(c.topics.iterations, 50);
        assert_eq!(c.format, InputFormat::Csv);
        assert_eq!(c.epoch, default_epoch());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(PipelineConfig::from_toml("inptu = \"x\""), Err(PipelineError::Config(_))));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.topics.k = 4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation() {
        let mut c = PipelineConfig::default();
        c.validate().unwrap();
        c.topics.k = 0;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.sentiment.val_fraction = 1.0;
        assert!(c.validate().is_err());
    }
}
