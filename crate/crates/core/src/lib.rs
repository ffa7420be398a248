//! Nonparametric change-point detection built on energy statistics.
//!
//! The crate is split into a numerical kernel ([`energy`]), the divisive
//! multi-point estimator with its permutation stopping rule ([`divisive`]),
//! an excess-mortality pipeline that turns weekly death counts into the
//! detector's input ([`excess`]), and seeded generators plus brute-force
//! oracles used by the test suites ([`synthetic`]).

pub mod divisive;
pub mod energy;
pub mod error;
pub mod excess;
pub mod series;
pub mod synthetic;

pub use divisive::{assign_clusters, detect, permutation_pvalue, ChangePoint, ChangePointReport, DetectParams};
pub use energy::{
    alpha_distance_matrix, best_split, energy_stat, q_stat, DistanceMatrix, EnergyParams, SegmentView, SplitCandidate,
};
pub use error::{Error, Result};
pub use series::MultiSeries;
