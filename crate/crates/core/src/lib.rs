//! Batch analytics for geotagged, timestamped short texts.
//!
//! Records flow through [`corpus`] ingestion and [`textprep`] into four
//! analyses: volume grids ([`analytics`]), CNN sentiment classification
//! ([`sentiment`]), chained per-week topic models ([`topics`]) and the
//! Semantic Brand Score over co-occurrence networks ([`sbsnet`]).
//! [`pipeline`] wires the stages together and writes report bundles.

pub mod corpus;
pub mod textprep;
pub mod analytics;
pub mod sbsnet;
pub mod topics;
pub mod sentiment;
pub mod chart;
pub mod pipeline;
