//! End-to-end runs: ingest, the requested analyses, and a report bundle.
//!
//! A bundle is a directory of CSV, JSON and SVG outputs plus
//! `manifest.json`, which inventories every other file with its SHA-256.

mod bundle;
mod config;
mod stages;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bundle::{bundle_digest, sha256_hex, Bundle, InventoryEntry, Manifest, StageFailure, StageTiming, MANIFEST};
pub use config::{PipelineConfig, SbsSection, SentimentSection, TopicsSection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Volume,
    SentimentTrain,
    SentimentScore,
    Topics,
    Sbs,
    Report,
}

impl Stage {
    /// Dependency order.
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Volume,
        Stage::SentimentTrain,
        Stage::SentimentScore,
        Stage::Topics,
        Stage::Sbs,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Volume => "volume",
            Stage::SentimentTrain => "sentiment-train",
            Stage::SentimentScore => "sentiment-score",
            Stage::Topics => "topics",
            Stage::Sbs => "sbs",
            Stage::Report => "report",
        }
    }

    /// Every stage, leaving out training when the config names a model.
    pub fn all_for(config: &PipelineConfig) -> Vec<Stage> {
        Stage::ALL
            .into_iter()
            .filter(|&s| s != Stage::SentimentTrain || config.sentiment.model.is_none())
            .collect()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    /// Process exit status: 2 config, 3 input, 4 stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Input(_) => 3,
            PipelineError::Stage { .. } => 4,
        }
    }
}

/// Sizes the worker pool used by parallel stages. Only the first call in a
/// process takes effect.
pub fn set_threads(n: usize) -> Result<(), PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))
}

/// Runs `requested` (plus ingest) in dependency order and writes the
/// manifest, also when a stage fails. Outputs of stages that finished are
/// kept.
pub fn run(config: &PipelineConfig, requested: &[Stage]) -> Result<Manifest, PipelineError> {
    config.validate()?;
    let mut stages: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| *s == Stage::Ingest || requested.contains(s))
        .collect();
    stages.dedup();
    if stages.contains(&Stage::SentimentScore)
        && !stages.contains(&Stage::SentimentTrain)
        && config.sentiment.model.is_none()
    {
        return Err(PipelineError::Config(
            "sentiment-score needs sentiment.model or a sentiment-train stage in the same run".into(),
        ));
    }

    let bundle = Bundle::create(&config.output_dir)?;
    let config_hash = config.hash();
    let input = std::fs::read(&config.input)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", config.input.display())))?;
    let input_sha256 = sha256_hex(&input);
    drop(input);
    let names: Vec<String> = stages.iter().map(|s| s.to_string()).collect();
    let run_id = sha256_hex(format!("{config_hash}\n{input_sha256}\n{}", names.join(",")).as_bytes())[..16].to_string();

    let mut ctx = stages::Context::new(config, &bundle);
    let mut timings = Vec::new();
    let mut failure = None;
    for &stage in &stages {
        let start = Instant::now();
        let result = ctx.run_stage(stage);
        timings.push(StageTiming { stage: stage.to_string(), millis: start.elapsed().as_millis() as u64 });
        if let Err(e) = result {
            failure = Some(e);
            break;
        }
    }

    let inventory = bundle
        .inventory()
        .map_err(|e| PipelineError::Input(format!("reading bundle back: {e}")))?;
    let manifest = Manifest {
        run_id,
        config_hash,
        input_sha256,
        stages: names,
        timings,
        failure: failure.as_ref().map(|e: &PipelineError| StageFailure {
            stage: match e {
                PipelineError::Stage { stage, .. } => stage.to_string(),
                _ => Stage::Ingest.to_string(),
            },
            error: e.to_string(),
        }),
        bundle_digest: bundle_digest(&inventory),
        inventory,
    };
    bundle
        .write_json(MANIFEST, &manifest)
        .map_err(|e| PipelineError::Input(format!("writing manifest: {e}")))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}
