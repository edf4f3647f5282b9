//! Aspect-guided perturbation harness for LLM peer-review pipelines.
//!
//! The crate perturbs exactly one component of a (paper, reviews, rebuttal)
//! bundle at a time, re-runs LLM reviewer and meta-reviewer roles against the
//! perturbed and unperturbed inputs, and classifies the reaction with paired
//! directional (Wilcoxon signed-rank) and invariance (TOST equivalence) tests.
//!
//! Modules:
//! - [`corpus`]: bundle loading, validation, and stratified sampling
//! - [`taxonomy`]: section-title relevance rules used to target paper edits
//! - [`llmgate`]: provider-agnostic chat gateway with caching and a scripted mock
//! - [`perturb`]: the nine perturbation operators plus accounting
//! - [`roles`]: prompt rendering and reviewer / meta-reviewer output parsing
//! - [`stats`]: paired tests, decision mappings, kappa, transition matrices
//! - [`report`]: table/figure aggregation of analysis artifacts

pub mod corpus;
pub mod llmgate;
pub mod perturb;
pub mod report;
pub mod rng;
pub mod roles;
pub mod stats;
pub mod taxonomy;
