//! Hybrid AML detection pipeline.
//!
//! Synthetic accounts and transactions are generated from published marginal
//! statistics ([`datagen`]), optionally enriched with public country-level
//! indicators ([`enrich`]), turned into a relational graph where transactions
//! are nodes ([`graph`]) and classified with a two-layer RGCN trained from
//! scratch ([`rgcn`]). [`metrics`] scores the predictions and [`harness`]
//! drives single runs and the synthetic-vs-hybrid comparison.

pub mod datagen;
pub mod enrich;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod rgcn;
mod seed;

pub use datagen::{AccountRecord, Dataset, GenConfig, TransactionRecord};
pub use enrich::{CountryIndicatorRow, JoinPolicy, NormalizedIndicators};
pub use error::{Error, ErrorClass, Result};
pub use graph::{FeatureMode, RelGraph, Relation};
pub use harness::{ComparisonReport, ExperimentConfig, RunReport};
pub use metrics::MetricsReport;
pub use rgcn::{Aggregation, ModelConfig, ModelParams};
pub use seed::derive_seed;
