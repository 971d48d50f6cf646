//! Simulation and optimization engine for clinical-trial decision rules that
//! borrow strength from an auxiliary (early) outcome while keeping frequentist
//! error control on the primary outcome.
//!
//! Module map:
//! - [`data`]: patient records, datasets and the summary layer (Z, p-values).
//! - [`scenario`]: ground-truth generators (odds-ratio joint cells, resampling harness).
//! - [`prior`]: the joint Bayesian logistic model used for design optimization.
//! - [`multitest`]: weighted Bonferroni family, comparators, bootstrap calibration.
//! - [`groupseq`]: spending, boundaries, posterior sampler, futility, sequential engine.
//! - [`utility`]: utility functions, Monte Carlo estimation, smoothing, search.

pub mod data;
pub mod groupseq;
pub mod multitest;
pub mod prior;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod utility;

pub use data::{Arm, GroupSummary, PatientRecord, SummaryError, TrialDataset};
pub use prior::{PriorHyperparams, ThetaDraw};
pub use scenario::{JointCell, ScenarioSpec};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
