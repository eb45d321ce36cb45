//! Estimation of transition intensities in a four-state illness–death
//! process (healthy, stroke, dementia, dead) observed through a fixed-length
//! window that opens at a random entry age.
//!
//! Persons who die before their window opens are never observed
//! (left-truncation); survivors are followed until death or the end of the
//! window (right-censoring). Under piecewise-constant intensities the maximum
//! likelihood estimate of each intensity is occurrences over exposure.
//!
//! Ages are measured in years since age 50 throughout.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod cohort;
pub mod error;
pub mod estimate;
pub mod exact_sum;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod markov;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod sim;

pub use aggregate::{
    aggregate_homogeneous, aggregate_mortality, aggregate_piecewise, Aggregates, IntervalAggregates,
    MortalityAggregates,
};
pub use cohort::{CohortSummary, Episode, Event, ObservedRecord, SurvivalRecord};
pub use error::{Error, Result, ValidationKind};
pub use estimate::{
    fit_homogeneous, fit_mortality, fit_piecewise, FitResult, FitStatus, Intensity, ModelKind, ParamEstimate,
    Provenance,
};
pub use inference::{contrast, pairwise_age_tests, wald_ci, ContrastResult, PairwiseTests};
pub use io::RunConfig;
pub use model::{
    EntryDistribution, ObservationScheme, ParameterSpace, Partition, PiecewiseRateSet, RateSet, State,
    TransitionKind, DEFAULT_TAU, DEFAULT_WINDOW,
};
pub use montecarlo::{consistency_curve, coverage_study, CoverageReport};
pub use sim::{sample_cohort, Cohort};
