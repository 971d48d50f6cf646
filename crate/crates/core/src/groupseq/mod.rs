//! Bayesian group-sequential designs with an auxiliary outcome.

mod boundary;
mod engine;
mod posterior;
mod predictive;
mod spending;

pub use boundary::{boundary_thresholds, BoundaryError, BoundarySchedule, CAPPED_THRESHOLD};
pub use spending::hsd_spending;
pub use posterior::{
    effective_sample_size, posterior_sample, sample_posterior, GroupParams, OutcomeModel, PosteriorDraws,
    PosteriorError, SamplerSettings, SingleOutcomePrior,
};
pub use predictive::{predictive_success_prob, simulate_future_z, PredictiveError, PredictiveSims};
pub use engine::{
    prepare_sequential_trial, run_sequential_trial, DesignKind, DesignPriors, EngineError, GroupSeqConfig,
    PreparedTrial, SequentialOutcome, StageRecord, StopReason,
};
