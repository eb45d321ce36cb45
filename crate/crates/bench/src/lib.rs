//! Fixtures shared by the benchmarks.

use ehe_core::{sample_cohort, ObservationScheme, ObservedRecord, Partition, PiecewiseRateSet, RateSet};

/// Rates at the magnitude of the published age-homogeneous fits.
pub fn rates() -> RateSet {
    RateSet::new([0.012, 0.0701, 0.0209, 0.0217, 0.06, 0.15]).expect("valid rates")
}

pub fn homogeneous() -> PiecewiseRateSet {
    PiecewiseRateSet::homogeneous(rates(), 63.0).expect("valid horizon")
}

/// Five-year age groups up to 63 years since 50.
pub fn age_groups() -> Partition {
    Partition::regular(5.0, 63.0).expect("valid partition")
}

pub fn cohort(n_all: usize) -> Vec<ObservedRecord> {
    sample_cohort(&homogeneous(), &ObservationScheme::default(), n_all, 1)
        .expect("simulation succeeds")
        .records
}
