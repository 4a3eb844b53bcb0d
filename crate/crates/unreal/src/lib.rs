//! Heavily-imbalanced semi-supervised node classification by iterative
//! retrieval and pseudo-labeling of unlabeled nodes.
//!
//! The pipeline trains a small GCN, pseudo-labels unlabeled nodes with
//! both the classifier and embedding-space clustering, keeps nodes whose
//! two labels agree, fuses geometric and confidence rankings through
//! rank-biased overlap, discards geometrically imbalanced candidates, and
//! grows the training set round by round. Vanilla, re-weighted, and plain
//! self-training baselines share the same trainer and reporting.
//!
//! Start with the `examples/` directory: each example is a runnable tour
//! of one capability. The `unreal` binary exposes the same operations as
//! subcommands (`prepare-split`, `run`, `sweep`, `audit`, `report`).

pub mod cluster;
pub mod config;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod select;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
