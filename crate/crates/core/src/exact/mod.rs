//! Ground-truth oracles computed by exact dynamic programming.
//!
//! Under Lebesgue measure the symbol process of a piecewise-linear Markov map
//! is a finite Markov chain (i.i.d. for full-branch maps), so the walk in a
//! fixed environment is the site marginal of a finite-phase chain on
//! `phase × ℤ`. Everything here works on that chain over a finite window,
//! in exact rationals unless a method says otherwise.

mod chain;
mod certificate;
mod paths;
mod series;
mod solomon;

pub use certificate::{
    return_cylinder_count, return_cylinder_count_for, transience_certificate, Direction,
    ReturnCylinderCount, TransienceCertificate,
};
pub use chain::{
    build_site_chain, first_passage_measure, first_passage_toward, Boundary, ChainStats,
    FirstPassage, Move, SiteChainDP, Weight,
};
pub use paths::{path_counts, PathCountTable};
pub use series::{series_diagnostic, SeriesDiagnostic};
pub use solomon::{alpha_support, solomon_classifier, SolomonVerdict, Trend};

use crate::map::MapError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExactError {
    #[error("base map is not full-branch; build the joint (symbol, site) chain instead")]
    UnsupportedBase,
    #[error("window [{lo}, {hi}] is too small: {reason}")]
    WindowTooSmall { lo: i64, hi: i64, reason: String },
    #[error("linear system is singular (a state cannot leave the stripe)")]
    SingularSystem,
    #[error("operation requires jumps of exactly +1 or -1")]
    UnsupportedJumps,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("alpha = {0} is degenerate (must lie strictly between 0 and 1)")]
    DegenerateAlpha(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Map(#[from] MapError),
}
