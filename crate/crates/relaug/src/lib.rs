//! Relational feature augmentation for tabular prediction tasks.
//!
//! Given a multi-table relational dataset with a prediction target on one
//! base table, this crate discovers which auxiliary attributes matter, how
//! they group into semantically coherent sub-tables, and how much each join
//! contributes to the final prediction:
//!
//! 1. Join planning scores and selects meta-paths from auxiliary tables to
//!    the base table over the PK/FK schema graph.
//! 2. An attention network over per-tuple attribute graphs learns pairwise
//!    attribute relationships; dense cliques (or communities) of strongly
//!    related attributes become projected sub-tables.
//! 3. A weighted message-passing network over a heterogeneous graph of base
//!    tuples and sub-tuples produces predictions plus per-join importance
//!    weights used for feature selection.
//!
//! Every stage is deterministic under a fixed root seed and exchanges
//! versioned JSON/CSV artifacts, so stages can run separately or as one
//! pipeline.

pub mod dataset;
pub mod encoders;
pub mod error;
pub mod gat;
pub mod harness;
pub mod hetgraph;
pub mod hgnn;
pub mod joinplan;
pub mod linker;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod subtables;
pub mod synth;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
