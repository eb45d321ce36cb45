//! Sufficient statistics: transition counts and person-time at risk, for the
//! whole age range and per partition interval.
//!
//! Exposures are kept as [`ExactSum`]s of signed episode endpoints, so the
//! interval exposures of a partition sum to the global exposure exactly and
//! the result does not depend on the order persons are processed in.

use rayon::prelude::*;

use crate::cohort::{ObservedRecord, SurvivalRecord};
use crate::error::{Error, Result};
use crate::exact_sum::ExactSum;
use crate::model::{Partition, State, TransitionKind};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregates {
    counts: [u64; 6],
    exposure: [ExactSum; 3],
}

fn living_index(h: State) -> usize {
    assert!(!h.is_absorbing(), "no exposure is accumulated in state d");
    h.index()
}

impl Aggregates {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds aggregates from published or hand-made statistics.
    pub fn from_parts(counts: &[(TransitionKind, u64)], exposures: &[(State, f64)]) -> Result<Self> {
        let mut agg = Aggregates::new();
        for &(hj, n) in counts {
            agg.counts[hj.index()] = n;
        }
        for &(h, e) in exposures {
            if h.is_absorbing() || !(e.is_finite() && e >= 0.0) {
                return Err(Error::domain(format!("invalid exposure {e} for state {h}")));
            }
            agg.exposure[h.index()] = ExactSum::from(e);
        }
        Ok(agg)
    }

    /// `N_hj`, the number of observed `h → j` jumps.
    pub fn count(&self, hj: TransitionKind) -> u64 {
        self.counts[hj.index()]
    }

    /// `E_h`, person-years at risk in state `h`.
    pub fn exposure(&self, h: State) -> f64 {
        self.exposure[living_index(h)].value()
    }

    /// Total exposure over all living states.
    pub fn total_exposure(&self) -> f64 {
        let mut total = ExactSum::new();
        for e in &self.exposure {
            total.merge(e);
        }
        total.value()
    }

    pub fn add_record(&mut self, record: &ObservedRecord) {
        for ep in record.episodes() {
            self.exposure[ep.state.index()].add_span(ep.start, ep.stop);
        }
        for (_, hj) in record.transitions() {
            self.counts[hj.index()] += 1;
        }
    }

    pub fn merge(&mut self, other: &Aggregates) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        for (a, b) in self.exposure.iter_mut().zip(&other.exposure) {
            a.merge(b);
        }
    }

    /// Invariant `N_hj > 0 ⇒ E_h > 0`.
    pub fn is_consistent(&self) -> bool {
        TransitionKind::ALL
            .into_iter()
            .all(|hj| self.count(hj) == 0 || self.exposure(hj.from()) > 0.0)
    }
}

/// Per-interval counts `A` and exposures `B` on a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalAggregates {
    partition: Partition,
    cells: Vec<Aggregates>,
}

impl IntervalAggregates {
    pub fn empty(partition: Partition) -> Self {
        let cells = vec![Aggregates::new(); partition.len()];
        IntervalAggregates { partition, cells }
    }

    pub fn from_cells(partition: Partition, cells: Vec<Aggregates>) -> Result<Self> {
        if cells.len() != partition.len() {
            return Err(Error::domain(format!(
                "{} cells for {} intervals",
                cells.len(),
                partition.len()
            )));
        }
        Ok(IntervalAggregates { partition, cells })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn cell(&self, l: usize) -> &Aggregates {
        &self.cells[l]
    }

    pub fn count(&self, hj: TransitionKind, l: usize) -> u64 {
        self.cells[l].count(hj)
    }

    pub fn exposure(&self, h: State, l: usize) -> f64 {
        self.cells[l].exposure(h)
    }

    /// Adds one person, clipping each episode to `]t_l, t_{l+1}]`. This covers
    /// every way an interval can overlap the observation window.
    pub fn add_record(&mut self, record: &ObservedRecord) -> Result<()> {
        let tau = self.partition.tau();
        if record.exit_age() > tau {
            return Err(Error::domain(format!(
                "record {} exits at {} beyond the partition end {tau}",
                record.id(),
                record.exit_age()
            )));
        }
        for ep in record.episodes() {
            let first = self.partition.interval_of(ep.start.max(f64::MIN_POSITIVE)).unwrap_or(0);
            for l in first..self.partition.len() {
                let (lo, hi) = self.partition.bounds(l);
                if lo >= ep.stop {
                    break;
                }
                let a = ep.start.max(lo);
                let b = ep.stop.min(hi);
                if b > a {
                    self.cells[l].exposure[ep.state.index()].add_span(a, b);
                }
            }
        }
        for (age, hj) in record.transitions() {
            let l = self.partition.interval_of(age)?;
            self.cells[l].counts[hj.index()] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &IntervalAggregates) -> Result<()> {
        if self.partition != other.partition {
            return Err(Error::domain("cannot merge aggregates on different partitions"));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        Ok(())
    }

    /// Sum over intervals; equals the global aggregates exactly.
    pub fn total(&self) -> Aggregates {
        let mut out = Aggregates::new();
        for c in &self.cells {
            out.merge(c);
        }
        out
    }

    /// Aggregates on a coarser partition whose breakpoints are a subset of
    /// this one's.
    pub fn coarsen(&self, coarse: &Partition) -> Result<IntervalAggregates> {
        if !coarse.is_refined_by(&self.partition) {
            return Err(Error::domain("target partition is not a coarsening"));
        }
        let mut out = IntervalAggregates::empty(coarse.clone());
        for (l, cell) in self.cells.iter().enumerate() {
            let (_, hi) = self.partition.bounds(l);
            let k = coarse.interval_of(hi)?;
            out.cells[k].merge(cell);
        }
        Ok(out)
    }
}

/// Statistics of the two-state mortality model: deaths with their observed
/// durations `T_i - U_i`, and censored persons with their follow-up.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MortalityAggregates {
    deaths: u64,
    censored: u64,
    death_time: ExactSum,
    censored_time: ExactSum,
}

impl MortalityAggregates {
    /// From published totals where every censored person was followed for
    /// the full window `w`.
    pub fn from_published(deaths: u64, death_time: f64, censored: u64, window: f64) -> Result<Self> {
        if !(death_time >= 0.0 && window > 0.0) {
            return Err(Error::domain("death time must be >= 0 and window > 0"));
        }
        Ok(MortalityAggregates {
            deaths,
            censored,
            death_time: ExactSum::from(death_time),
            censored_time: ExactSum::from(window * censored as f64),
        })
    }

    pub fn add(&mut self, r: &SurvivalRecord) {
        if r.died {
            self.deaths += 1;
            self.death_time.add_span(r.entry_age, r.exit_age);
        } else {
            self.censored += 1;
            self.censored_time.add_span(r.entry_age, r.exit_age);
        }
    }

    pub fn deaths(&self) -> u64 {
        self.deaths
    }

    pub fn censored(&self) -> u64 {
        self.censored
    }

    /// `Σ (T_i - U_i)` over persons with observed death.
    pub fn death_time(&self) -> f64 {
        self.death_time.value()
    }

    pub fn censored_time(&self) -> f64 {
        self.censored_time.value()
    }

    /// Total person-years at risk.
    pub fn exposure(&self) -> f64 {
        let mut s = self.death_time.clone();
        s.merge(&self.censored_time);
        s.value()
    }
}

pub fn aggregate_mortality(records: &[SurvivalRecord]) -> MortalityAggregates {
    let mut agg = MortalityAggregates::default();
    for r in records {
        agg.add(r);
    }
    agg
}

pub fn aggregate_homogeneous(records: &[ObservedRecord]) -> Aggregates {
    records
        .par_iter()
        .fold(Aggregates::new, |mut acc, r| {
            acc.add_record(r);
            acc
        })
        .reduce(Aggregates::new, |mut a, b| {
            a.merge(&b);
            a
        })
}

pub fn aggregate_piecewise(records: &[ObservedRecord], partition: &Partition) -> Result<IntervalAggregates> {
    records
        .par_iter()
        .try_fold(
            || IntervalAggregates::empty(partition.clone()),
            |mut acc, r| {
                acc.add_record(r)?;
                Ok(acc)
            },
        )
        .try_reduce(
            || IntervalAggregates::empty(partition.clone()),
            |mut a, b| {
                a.merge(&b)?;
                Ok(a)
            },
        )
}
