//! Deterministic walks in deterministic environments (DWDE) on ℤ driven by
//! piecewise-linear Markov interval maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`map`]: the base dynamics, exact cylinder measures and Gibbs data.
//! * [`environment`]: two-sided environments of transition functions.
//! * [`walk`]: the skew product `(x, i) -> (Tx, i + f_i(x))`, trajectories
//!   and seeded ensembles.
//! * [`exact`]: exact dynamic-programming oracles, path counts, the
//!   transience certificate, the return-series diagnostic and the Solomon
//!   comparator.
//! * [`structure`]: finite-window reachability graphs and linkage checks.
//! * [`experiments`]: configuration, presets, classification and reports.

pub mod environment;
pub mod exact;
pub mod experiments;
pub mod map;
pub mod rational;
pub mod seed;
pub mod structure;
pub mod walk;

pub use environment::{EnvironmentModel, EnvironmentRealization, TransitionFunction};
pub use map::{CylinderWord, MapSpec, MarkovIntervalMap};
pub use rational::Rational;
pub use walk::{Mode, Trajectory, WalkState};

