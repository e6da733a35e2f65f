//! Community detection for microbial co-occurrence networks.
//!
//! The pipeline turns a samples-by-taxa count table into a binary
//! co-occurrence network (MCLR transform, Spearman correlation, BH
//! adjustment) and clusters it with a Bayesian stochastic block model whose
//! label prior is a Markov random field over the taxonomy. The model is fitted
//! with a seeded Gibbs sampler.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod inference;
pub mod ingest;
pub mod metrics;
pub mod network;
pub mod sbm;
pub mod scalar;
pub mod simgen;
pub mod transform;

pub use error::{Error, Result};
pub use inference::{select_k, FitSummary, KSelection, SelectionMethod};
pub use ingest::{AbundanceMatrix, BinaryNetwork, TaxonomyMap};
pub use metrics::{ari, MetricReport};
pub use sbm::{gibbs_run, ChainTrace, CommunityAssignment, EdgeProbabilityMatrix, SamplerConfig};
pub use scalar::Scalar;
pub use simgen::{ScenarioSpec, Strength, SyntheticDataset};
pub use transform::ShiftMode;

pub type Real = f64;
pub type Config = sbm::SamplerConfig<Real>;
pub type Trace = sbm::ChainTrace<Real>;
pub type EdgeProbabilities = sbm::EdgeProbabilityMatrix<Real>;
pub type Fit = inference::FitSummary<Real>;
pub type Selection = inference::KSelection<Real>;
pub type Scenario = simgen::ScenarioSpec<Real>;
pub type Dataset = simgen::SyntheticDataset<Real>;
pub type Composition = transform::CompositionMatrix<Real>;
pub type Transformed = transform::TransformedMatrix<Real>;
pub type Correlations = network::CorrelationResult<Real>;
