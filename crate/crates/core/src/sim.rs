//! Trajectory simulation and the truncation/censoring observation filter.

use rand::Rng;
use rayon::prelude::*;

use crate::cohort::{CohortSummary, Event, ObservedRecord};
use crate::error::{Error, Result};
use crate::model::{total_exit_rate, ObservationScheme, PiecewiseRateSet, State, TransitionKind};
use crate::rng::substream;

/// Full latent history from `X_0 = H` at age 50 up to `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    jumps: Vec<Event>,
    horizon: f64,
}

impl Trajectory {
    pub fn jumps(&self) -> &[Event] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// State occupied at age `t` (right-continuous: a jump at `t` counts).
    pub fn state_at(&self, t: f64) -> State {
        self.jumps
            .iter()
            .take_while(|j| j.age <= t)
            .last()
            .map_or(State::Healthy, |j| j.to)
    }

    pub fn death_age(&self) -> Option<f64> {
        self.jumps.last().filter(|j| j.to.is_absorbing()).map(|j| j.age)
    }

    /// Still alive when simulation stopped at the horizon.
    pub fn alive_at_horizon(&self) -> bool {
        self.death_age().is_none()
    }
}

/// Draws one trajectory on `(0, horizon]`.
///
/// Within each partition interval the holding time is exponential with the
/// interval's total exit rate; a draw that overshoots the interval end is
/// discarded and the clock restarts at the breakpoint, which is exact for
/// piecewise-constant hazards by memorylessness.
pub fn sample_trajectory<R: Rng + ?Sized>(
    rates: &PiecewiseRateSet,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon <= rates.tau()) {
        return Err(Error::domain(format!(
            "simulation horizon {horizon} outside (0, {}]",
            rates.tau()
        )));
    }
    let partition = rates.partition();
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let mut state = State::Healthy;
    let mut l = 0;
    while !state.is_absorbing() {
        let cell = rates.interval(l);
        let end = partition.bounds(l).1.min(horizon);
        let q = total_exit_rate(cell, state)?;
        let candidate = if q > 0.0 {
            t - (1.0 - rng.random::<f64>()).ln() / q
        } else {
            f64::INFINITY
        };
        if candidate <= end {
            let to = pick_destination(cell, state, q, rng);
            jumps.push(Event { age: candidate, to });
            t = candidate;
            state = to;
        } else if end >= horizon {
            break;
        } else {
            t = end;
            l += 1;
        }
    }
    Ok(Trajectory { jumps, horizon })
}

fn pick_destination<R: Rng + ?Sized>(cell: &crate::model::RateSet, from: State, total: f64, rng: &mut R) -> State {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for hj in from.exits() {
        let r = cell.get(hj);
        if r == 0.0 {
            continue;
        }
        acc += r;
        last = Some(hj);
        if target < acc {
            return hj.to();
        }
    }
    // rounding can leave target == total; fall back to the last positive exit
    last.map(TransitionKind::to).expect("positive total exit rate")
}

/// Observes `traj` from entry age `u` over `(u, u + w]`. Returns `None` when
/// the person is already dead at `u` (left-truncated).
pub fn observe(traj: &Trajectory, u: f64, scheme: &ObservationScheme) -> Result<Option<ObservedRecord>> {
    let max_entry = scheme.tau - scheme.window;
    if !(u >= 0.0 && u <= max_entry) {
        return Err(Error::domain(format!("entry age {u} outside [0, {max_entry}]")));
    }
    let window_end = u + scheme.window;
    if traj.horizon() < window_end {
        return Err(Error::domain(format!(
            "trajectory simulated to {} but window ends at {window_end}",
            traj.horizon()
        )));
    }
    let entry_state = traj.state_at(u);
    if entry_state.is_absorbing() {
        return Ok(None);
    }
    let events: Vec<Event> = traj
        .jumps()
        .iter()
        .copied()
        .filter(|j| j.age > u && j.age <= window_end)
        .collect();
    let exit_age = match events.last() {
        Some(e) if e.to.is_absorbing() => e.age,
        _ => window_end,
    };
    Ok(Some(ObservedRecord::new(String::new(), u, entry_state, exit_age, events)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub records: Vec<ObservedRecord>,
    pub summary: CohortSummary,
}

pub fn person_id(index: usize, n_all: usize) -> String {
    let width = n_all.max(1).to_string().len();
    format!("p{:0width$}", index + 1)
}

/// Simulates `n_all` latent persons and keeps the non-truncated ones.
///
/// Person `i` draws its entry age and then its trajectory from stream `i` of
/// `seed`; trajectories are only simulated up to the end of the person's own
/// window. Output order is by person index.
pub fn sample_cohort(
    rates: &PiecewiseRateSet,
    scheme: &ObservationScheme,
    n_all: usize,
    seed: u64,
) -> Result<Cohort> {
    scheme.validate()?;
    if rates.tau() < scheme.tau {
        return Err(Error::domain(format!(
            "rates defined up to {} but horizon is {}",
            rates.tau(),
            scheme.tau
        )));
    }
    let people: Vec<Option<ObservedRecord>> = (0..n_all)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let u = scheme.entry.sample(&mut rng);
            let traj = sample_trajectory(rates, u + scheme.window, &mut rng)?;
            let mut rec = observe(&traj, u, scheme)?;
            if let Some(r) = rec.as_mut() {
                r.set_id(person_id(i, n_all));
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    let records: Vec<ObservedRecord> = people.into_iter().flatten().collect();
    let summary = CohortSummary {
        n_all,
        n: records.len(),
        truncated: n_all - records.len(),
    };
    Ok(Cohort { records, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntryDistribution, Partition, RateSet};

    fn homogeneous(pairs: &[(TransitionKind, f64)]) -> PiecewiseRateSet {
        PiecewiseRateSet::homogeneous(RateSet::from_pairs(pairs).unwrap(), 63.0).unwrap()
    }

    fn death_at(t: f64) -> Trajectory {
        Trajectory {
            jumps: vec![Event { age: t, to: State::Dead }],
            horizon: 63.0,
        }
    }

    #[test]
    fn zero_rates_no_jumps() {
        let r = homogeneous(&[]);
        let traj = sample_trajectory(&r, 63.0, &mut substream(1, 0)).unwrap();
        assert!(traj.jumps().is_empty());
        assert!(traj.alive_at_horizon());
        assert_eq!(traj.state_at(30.0), State::Healthy);
    }

    #[test]
    fn fast_death_holding_time_mean() {
        let r = homogeneous(&[(TransitionKind::HDEAD, 1e3)]);
        let n = 20_000;
        let mut sum = 0.0;
        for i in 0..n {
            let traj = sample_trajectory(&r, 63.0, &mut substream(3, i)).unwrap();
            assert_eq!(traj.jumps().len(), 1);
            sum += traj.death_age().unwrap();
        }
        let mean = sum / n as f64;
        // sd of the mean is 1e-3 / sqrt(n)
        assert!((mean - 1e-3).abs() < 4.0 * 1e-3 / (n as f64).sqrt());
    }

    #[test]
    fn observe_truncated_when_dead_before_entry() {
        let scheme = ObservationScheme::default();
        assert!(observe(&death_at(35.0), 39.0, &scheme).unwrap().is_none());
    }

    #[test]
    fn observe_death_inside_window() {
        let scheme = ObservationScheme::default();
        let rec = observe(&death_at(34.0), 30.0, &scheme).unwrap().unwrap();
        assert!(rec.died());
        assert_eq!(rec.exit_age(), 34.0);
        assert_eq!(rec.entry_state(), State::Healthy);
    }

    #[test]
    fn observe_censors_after_window() {
        let scheme = ObservationScheme::default();
        let rec = observe(&death_at(50.0), 39.0, &scheme).unwrap().unwrap();
        assert!(!rec.died());
        assert_eq!(rec.exit_age(), 48.0);
        assert!(rec.events().is_empty());
        assert!(observe(&death_at(50.0), 55.0, &scheme).is_err());
    }

    #[test]
    fn observe_ignores_wider_horizon() {
        let traj = Trajectory {
            jumps: vec![
                Event { age: 12.0, to: State::Stroke },
                Event { age: 31.0, to: State::Dementia },
                Event { age: 44.0, to: State::Dead },
            ],
            horizon: 80.0,
        };
        let narrow = ObservationScheme::default();
        let wide = ObservationScheme { tau: 80.0, ..narrow.clone() };
        for u in [0.0, 10.0, 25.0, 36.0, 54.0] {
            assert_eq!(observe(&traj, u, &narrow).unwrap(), observe(&traj, u, &wide).unwrap());
        }
    }

    #[test]
    fn cohort_without_deaths_is_complete() {
        let c = sample_cohort(&homogeneous(&[]), &ObservationScheme::default(), 500, 9).unwrap();
        assert_eq!(c.summary.n, 500);
        assert_eq!(c.summary.beta_hat(), Some(1.0));
        assert_eq!(c.records[0].id(), "p001");
    }

    #[test]
    fn cohort_is_deterministic() {
        let r = homogeneous(&[
            (TransitionKind::HS1, 0.02),
            (TransitionKind::HD, 0.03),
            (TransitionKind::HDEAD, 0.03),
            (TransitionKind::S1D, 0.1),
            (TransitionKind::S1DEAD, 0.08),
            (TransitionKind::DDEAD, 0.2),
        ]);
        let a = sample_cohort(&r, &ObservationScheme::default(), 2000, 42).unwrap();
        let b = sample_cohort(&r, &ObservationScheme::default(), 2000, 42).unwrap();
        let c = sample_cohort(&r, &ObservationScheme::default(), 2000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.summary.n + a.summary.truncated, 2000);
    }

    #[test]
    fn degenerate_entry_survival_fraction() {
        let lambda = 0.04;
        let r = homogeneous(&[(TransitionKind::HDEAD, lambda)]);
        let scheme = ObservationScheme::new(63.0, 9.0, EntryDistribution::Degenerate { at: 20.0 }).unwrap();
        let n = 40_000;
        let c = sample_cohort(&r, &scheme, n, 5).unwrap();
        let p = (-lambda * 20.0f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((c.summary.beta_hat().unwrap() - p).abs() < 3.0 * se);
    }

    #[test]
    fn piecewise_rates_follow_intervals() {
        // death impossible before 10, certain-ish right after
        let p = Partition::new(vec![0.0, 10.0, 63.0]).unwrap();
        let cells = vec![
            RateSet::zero(),
            RateSet::from_pairs(&[(TransitionKind::HDEAD, 50.0)]).unwrap(),
        ];
        let r = PiecewiseRateSet::new(p, cells).unwrap();
        for i in 0..200 {
            let traj = sample_trajectory(&r, 63.0, &mut substream(11, i)).unwrap();
            let d = traj.death_age().unwrap();
            assert!(d > 10.0 && d < 11.0, "{d}");
        }
    }
}
