//! Convolutional tweet sentiment classifier.
//!
//! Tokens are embedded into a fixed `pad_len x embed_dim` matrix, passed
//! through banks of 1-D convolutions with ReLU and max-over-time pooling,
//! a dropout-regularized dense layer and a sigmoid output.

pub mod io;
pub mod metrics;
pub mod model;
pub mod train;

use thiserror::Error;

pub use metrics::{classify, evaluate, roc_auc, MetricsReport, THRESHOLD};
pub use model::{conv_feature, embed, BankSpec, Filter, Mode, ModelShape, SentimentModel, TweetMatrix};
pub use train::{score_examples, split, train, EpochLog, Example, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("filter width {width} exceeds padded length {pad_len}")]
    FilterTooWide { width: usize, pad_len: usize },
    #[error("invalid model shape: {0}")]
    InvalidShape(String),
    #[error("numerical fault: {0}")]
    NumericalFault(String),
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("no training examples")]
    EmptyData,
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
