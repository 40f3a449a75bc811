//! Latent-subgraph criterion for linear structural equation models with
//! latent variables.
//!
//! * [`graph`]: observed/latent digraphs, treks, reachability, canonical graphs.
//! * [`flow`]: the subgraph-restricted flow integer program and trek systems.
//! * [`lsc`]: the criterion, the decision procedure and certificates.
//! * [`numeric`]: parameters, covariance matrices and effect recovery.
//! * [`experiment`]: random graphs and identifiability counts.

pub mod experiment;
pub mod flow;
pub mod graph;
pub mod lsc;
pub mod numeric;
