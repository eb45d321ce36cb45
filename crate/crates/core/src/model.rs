//! State space, admissible transitions and parameter containers of the
//! healthy → stroke → dementia → death model.
//!
//! Ages are measured in years since the calendar age of 50, so `t = 0` is the
//! fiftieth birthday and the default horizon `τ = 63` corresponds to age 113.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Default horizon in years since age 50.
pub const DEFAULT_TAU: f64 = 63.0;
/// Default observation window length in years.
pub const DEFAULT_WINDOW: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum State {
    Healthy,
    Stroke,
    Dementia,
    Dead,
}

impl State {
    pub const ALL: [State; 4] = [State::Healthy, State::Stroke, State::Dementia, State::Dead];
    /// The states a person can be at risk in.
    pub const LIVING: [State; 3] = [State::Healthy, State::Stroke, State::Dementia];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            State::Healthy => "H",
            State::Stroke => "S1",
            State::Dementia => "D",
            State::Dead => "d",
        }
    }

    pub fn is_absorbing(self) -> bool {
        self == State::Dead
    }

    /// Transitions leaving this state, in canonical order.
    pub fn exits(self) -> impl Iterator<Item = TransitionKind> {
        TransitionKind::ALL.into_iter().filter(move |t| t.from() == self)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for State {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl FromStr for State {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" => Ok(State::Healthy),
            "S1" => Ok(State::Stroke),
            "D" => Ok(State::Dementia),
            "d" => Ok(State::Dead),
            other => Err(Error::domain(format!("unknown state code {other:?}"))),
        }
    }
}

/// One of the six admissible transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionKind {
    from: State,
    to: State,
}

impl TransitionKind {
    pub const HS1: TransitionKind = TransitionKind::raw(State::Healthy, State::Stroke);
    pub const S1D: TransitionKind = TransitionKind::raw(State::Stroke, State::Dementia);
    pub const HD: TransitionKind = TransitionKind::raw(State::Healthy, State::Dementia);
    pub const HDEAD: TransitionKind = TransitionKind::raw(State::Healthy, State::Dead);
    pub const S1DEAD: TransitionKind = TransitionKind::raw(State::Stroke, State::Dead);
    pub const DDEAD: TransitionKind = TransitionKind::raw(State::Dementia, State::Dead);

    pub const ALL: [TransitionKind; 6] = [
        Self::HS1,
        Self::S1D,
        Self::HD,
        Self::HDEAD,
        Self::S1DEAD,
        Self::DDEAD,
    ];

    const fn raw(from: State, to: State) -> Self {
        TransitionKind { from, to }
    }

    pub fn new(from: State, to: State) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.from == from && t.to == to)
            .ok_or_else(|| Error::domain(format!("transition {from}->{to} is not admissible")))
    }

    pub fn is_admissible(from: State, to: State) -> bool {
        Self::new(from, to).is_ok()
    }

    pub fn from(self) -> State {
        self.from
    }

    pub fn to(self) -> State {
        self.to
    }

    /// Position in [`TransitionKind::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&t| t == self).expect("admissible by construction")
    }

    pub fn label(self) -> &'static str {
        match (self.from, self.to) {
            (State::Healthy, State::Stroke) => "HS1",
            (State::Stroke, State::Dementia) => "S1D",
            (State::Healthy, State::Dementia) => "HD",
            (State::Healthy, State::Dead) => "Hd",
            (State::Stroke, State::Dead) => "S1d",
            (State::Dementia, State::Dead) => "Dd",
            _ => unreachable!("non-admissible transitions cannot be constructed"),
        }
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TransitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.label() == s)
            .ok_or_else(|| Error::domain(format!("unknown transition {s:?}")))
    }
}

/// Box constraints `ε_hj ≤ λ_hj ≤ 1/ε_hj` on the intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    eps: [f64; 6],
}

impl ParameterSpace {
    pub fn new(eps: [f64; 6]) -> Result<Self> {
        if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::domain(format!("parameter-space epsilon {bad} not in (0, 1)")));
        }
        Ok(ParameterSpace { eps })
    }

    pub fn uniform(eps: f64) -> Result<Self> {
        Self::new([eps; 6])
    }

    pub fn bounds(&self, hj: TransitionKind) -> (f64, f64) {
        let e = self.eps[hj.index()];
        (e, 1.0 / e)
    }

    pub fn contains(&self, rates: &RateSet) -> bool {
        TransitionKind::ALL.into_iter().all(|hj| {
            let (lo, hi) = self.bounds(hj);
            (lo..=hi).contains(&rates.get(hj))
        })
    }
}

impl Default for ParameterSpace {
    fn default() -> Self {
        ParameterSpace { eps: [1e-6; 6] }
    }
}

/// Age-homogeneous intensities, events per person-year.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateSet {
    rates: [f64; 6],
}

impl RateSet {
    pub fn new(rates: [f64; 6]) -> Result<Self> {
        for (hj, r) in TransitionKind::ALL.iter().zip(rates) {
            check_rate(*hj, r)?;
        }
        Ok(RateSet { rates })
    }

    pub fn zero() -> Self {
        RateSet::default()
    }

    pub fn from_pairs(pairs: &[(TransitionKind, f64)]) -> Result<Self> {
        let mut rates = RateSet::zero();
        for &(hj, r) in pairs {
            rates.set(hj, r)?;
        }
        Ok(rates)
    }

    pub fn get(&self, hj: TransitionKind) -> f64 {
        self.rates[hj.index()]
    }

    pub fn set(&mut self, hj: TransitionKind, rate: f64) -> Result<()> {
        check_rate(hj, rate)?;
        self.rates[hj.index()] = rate;
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 6] {
        self.rates
    }

    pub fn iter(&self) -> impl Iterator<Item = (TransitionKind, f64)> + '_ {
        TransitionKind::ALL.into_iter().map(|hj| (hj, self.get(hj)))
    }
}

impl Serialize for RateSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(6))?;
        for (hj, r) in self.iter() {
            map.serialize_entry(hj.label(), &r)?;
        }
        map.end()
    }
}

fn check_rate(hj: TransitionKind, rate: f64) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("rate for {hj} must be finite and >= 0, got {rate}")))
    }
}

/// Sum of the exit intensities of `h`.
pub fn total_exit_rate(rates: &RateSet, h: State) -> Result<f64> {
    if h.is_absorbing() {
        return Err(Error::domain("state d is absorbing and has no exit rate"));
    }
    Ok(h.exits().map(|hj| rates.get(hj)).sum())
}

/// Breakpoints `0 = t_0 < t_1 < … < t_b = τ`. Interval `l` (zero-based here)
/// is the left-open, right-closed `]t_l, t_{l+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    breaks: Vec<f64>,
}

impl Partition {
    pub fn new(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::domain("partition needs at least two breakpoints"));
        }
        if breaks[0] != 0.0 {
            return Err(Error::domain(format!("partition must start at 0, got {}", breaks[0])));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("partition breakpoints must be finite"));
        }
        if let Some(w) = breaks.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::domain(format!(
                "partition must be strictly increasing ({} >= {})",
                w[0], w[1]
            )));
        }
        Ok(Partition { breaks })
    }

    /// The trivial partition `{0, τ}`.
    pub fn single(tau: f64) -> Result<Self> {
        Self::new(vec![0.0, tau])
    }

    /// Breakpoints every `width` years, with a final shorter interval if
    /// `tau` is not a multiple of `width`.
    pub fn regular(width: f64, tau: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::domain("interval width must be positive"));
        }
        let mut breaks = vec![0.0];
        let mut k = 1.0;
        while k * width < tau {
            breaks.push(k * width);
            k += 1.0;
        }
        breaks.push(tau);
        Self::new(breaks)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Number of intervals `b`.
    pub fn len(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tau(&self) -> f64 {
        *self.breaks.last().expect("non-empty")
    }

    pub fn bounds(&self, l: usize) -> (f64, f64) {
        (self.breaks[l], self.breaks[l + 1])
    }

    /// Zero-based index of the interval `]t_l, t_{l+1}]` containing `t`.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        if !(t > 0.0 && t <= self.tau()) {
            return Err(Error::domain(format!("age {t} outside (0, {}]", self.tau())));
        }
        Ok(self.breaks.partition_point(|&b| b < t) - 1)
    }

    /// True when every breakpoint of `self` is also one of `finer`.
    pub fn is_refined_by(&self, finer: &Partition) -> bool {
        self.tau() == finer.tau() && self.breaks.iter().all(|b| finer.breaks.contains(b))
    }
}

/// Piecewise-constant intensities on a [`Partition`].
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseRateSet {
    partition: Partition,
    cells: Vec<RateSet>,
}

impl PiecewiseRateSet {
    pub fn new(partition: Partition, cells: Vec<RateSet>) -> Result<Self> {
        if cells.len() != partition.len() {
            return Err(Error::domain(format!(
                "{} rate sets for a partition of {} intervals",
                cells.len(),
                partition.len()
            )));
        }
        Ok(PiecewiseRateSet { partition, cells })
    }

    pub fn homogeneous(rates: RateSet, tau: f64) -> Result<Self> {
        Self::new(Partition::single(tau)?, vec![rates])
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn interval(&self, l: usize) -> &RateSet {
        &self.cells[l]
    }

    pub fn intervals(&self) -> &[RateSet] {
        &self.cells
    }

    pub fn get(&self, hj: TransitionKind, l: usize) -> f64 {
        self.cells[l].get(hj)
    }

    /// `λ_hj(t)` for `t ∈ (0, τ]`.
    pub fn rate_at(&self, hj: TransitionKind, t: f64) -> Result<f64> {
        let l = self.partition.interval_of(t)?;
        Ok(self.cells[l].get(hj))
    }

    pub fn total_exit_rate_at(&self, h: State, t: f64) -> Result<f64> {
        let l = self.partition.interval_of(t)?;
        total_exit_rate(&self.cells[l], h)
    }

    /// The homogeneous rates when `b = 1`.
    pub fn as_homogeneous(&self) -> Option<&RateSet> {
        (self.cells.len() == 1).then(|| &self.cells[0])
    }

    pub fn tau(&self) -> f64 {
        self.partition.tau()
    }
}

impl Serialize for PiecewiseRateSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("partition", self.partition.breaks())?;
        map.serialize_entry("rates", &self.cells)?;
        map.end()
    }
}

/// Distribution of the entry age `U`, independent of the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EntryDistribution {
    Uniform { lo: f64, hi: f64 },
    Degenerate { at: f64 },
    Empirical { ages: Vec<f64> },
}

impl EntryDistribution {
    pub fn support(&self) -> (f64, f64) {
        match self {
            EntryDistribution::Uniform { lo, hi } => (*lo, *hi),
            EntryDistribution::Degenerate { at } => (*at, *at),
            EntryDistribution::Empirical { ages } => ages
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &u| (a.min(u), b.max(u))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EntryDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            EntryDistribution::Degenerate { at } => *at,
            EntryDistribution::Empirical { ages } => ages[rng.random_range(0..ages.len())],
        }
    }

    /// `P(a ≤ U < b)`.
    pub fn prob_in(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            EntryDistribution::Uniform { lo, hi } if hi > lo => {
                let overlap = b.min(*hi) - a.max(*lo);
                (overlap / (hi - lo)).max(0.0)
            }
            EntryDistribution::Uniform { lo: at, .. } | EntryDistribution::Degenerate { at } => {
                f64::from(u8::from(a <= *at && *at < b))
            }
            EntryDistribution::Empirical { ages } => {
                ages.iter().filter(|&&u| a <= u && u < b).count() as f64 / ages.len() as f64
            }
        }
    }

    /// `E[f(U)]`. Continuous parts use composite Simpson quadrature split at
    /// `breaks` so that piecewise-smooth integrands are integrated per piece.
    pub fn expect(&self, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        match self {
            EntryDistribution::Uniform { lo, hi } if hi > lo => {
                let mut knots = vec![*lo];
                knots.extend(breaks.iter().copied().filter(|b| b > lo && b < hi));
                knots.push(*hi);
                let total: f64 = knots
                    .windows(2)
                    .map(|w| simpson(&f, w[0], w[1], ((w[1] - w[0]) * 40.0).ceil() as usize + 16))
                    .sum();
                total / (hi - lo)
            }
            EntryDistribution::Uniform { lo: at, .. } | EntryDistribution::Degenerate { at } => f(*at),
            EntryDistribution::Empirical { ages } => {
                ages.iter().map(|&u| f(u)).sum::<f64>() / ages.len() as f64
            }
        }
    }
}

pub(crate) fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Horizon, window length and entry-age law of the observation scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationScheme {
    pub tau: f64,
    pub window: f64,
    pub entry: EntryDistribution,
}

impl ObservationScheme {
    pub fn new(tau: f64, window: f64, entry: EntryDistribution) -> Result<Self> {
        let scheme = ObservationScheme { tau, window, entry };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0 && self.window <= self.tau && self.tau.is_finite()) {
            return Err(Error::domain(format!(
                "window {} must satisfy 0 < w <= tau = {}",
                self.window, self.tau
            )));
        }
        if let EntryDistribution::Empirical { ages } = &self.entry {
            if ages.is_empty() {
                return Err(Error::domain("empirical entry distribution has no ages"));
            }
        }
        if let EntryDistribution::Uniform { lo, hi } = &self.entry {
            if lo > hi {
                return Err(Error::domain(format!("uniform entry bounds reversed: {lo} > {hi}")));
            }
        }
        let (lo, hi) = self.entry.support();
        let max_entry = self.tau - self.window;
        if !(lo >= 0.0 && hi <= max_entry) {
            return Err(Error::domain(format!(
                "entry-age support [{lo}, {hi}] not within [0, {max_entry}]"
            )));
        }
        Ok(())
    }
}

impl Default for ObservationScheme {
    fn default() -> Self {
        ObservationScheme {
            tau: DEFAULT_TAU,
            window: DEFAULT_WINDOW,
            entry: EntryDistribution::Uniform {
                lo: 0.0,
                hi: DEFAULT_TAU - DEFAULT_WINDOW,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn age_group_partition() -> Partition {
        Partition::regular(5.0, 63.0).unwrap()
    }

    #[test]
    fn transition_set_is_exactly_the_six_pairs() {
        let mut admissible = 0;
        for from in State::ALL {
            for to in State::ALL {
                if TransitionKind::is_admissible(from, to) {
                    admissible += 1;
                    assert!(from < to);
                }
            }
        }
        assert_eq!(admissible, 6);
        assert!(TransitionKind::new(State::Dementia, State::Stroke).is_err());
        assert!(TransitionKind::new(State::Healthy, State::Healthy).is_err());
        assert_eq!(State::Dead.exits().count(), 0);
        for hj in TransitionKind::ALL {
            assert_eq!(hj.label().parse::<TransitionKind>().unwrap(), hj);
        }
    }

    #[test]
    fn rate_at_single_interval() {
        let rates = RateSet::from_pairs(&[(TransitionKind::HD, 0.0209)]).unwrap();
        let pw = PiecewiseRateSet::homogeneous(rates, 63.0).unwrap();
        assert_eq!(pw.rate_at(TransitionKind::HD, 30.0).unwrap(), 0.0209);
    }

    #[test]
    fn rate_at_is_right_closed() {
        let p = age_group_partition();
        assert_eq!(p.len(), 13);
        assert_eq!(p.bounds(12), (60.0, 63.0));
        let cells = (0..13)
            .map(|l| RateSet::from_pairs(&[(TransitionKind::S1D, l as f64)]).unwrap())
            .collect();
        let pw = PiecewiseRateSet::new(p, cells).unwrap();
        assert_eq!(pw.rate_at(TransitionKind::S1D, 5.0).unwrap(), 0.0);
        assert_eq!(pw.rate_at(TransitionKind::S1D, 5.000001).unwrap(), 1.0);
        assert_eq!(pw.rate_at(TransitionKind::S1D, 63.0).unwrap(), 12.0);
        assert!(pw.rate_at(TransitionKind::S1D, 0.0).is_err());
        assert!(pw.rate_at(TransitionKind::S1D, 63.5).is_err());
    }

    #[test]
    fn rate_at_in_age_group() {
        let p = age_group_partition();
        let mut cells = vec![RateSet::zero(); 13];
        cells[6].set(TransitionKind::S1D, 0.0856).unwrap();
        let pw = PiecewiseRateSet::new(p, cells).unwrap();
        // age 82 lies in ]80, 85]
        assert_eq!(pw.rate_at(TransitionKind::S1D, 32.0).unwrap(), 0.0856);
    }

    #[test]
    fn total_exit_rate_sums_exits() {
        let r = RateSet::from_pairs(&[
            (TransitionKind::HS1, 0.01),
            (TransitionKind::HD, 0.02),
            (TransitionKind::HDEAD, 0.03),
            (TransitionKind::DDEAD, 0.1),
        ])
        .unwrap();
        assert!((total_exit_rate(&r, State::Healthy).unwrap() - 0.06).abs() < 1e-15);
        assert_eq!(total_exit_rate(&r, State::Dementia).unwrap(), 0.1);
        assert_eq!(total_exit_rate(&RateSet::zero(), State::Healthy).unwrap(), 0.0);
        assert!(total_exit_rate(&r, State::Dead).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![1.0, 2.0]).is_err());
        assert!(Partition::new(vec![0.0, 5.0, 5.0, 10.0]).is_err());
        assert!(Partition::new(vec![0.0, 63.0]).is_ok());
        assert!(Partition::single(63.0).unwrap().is_refined_by(&age_group_partition()));
    }

    #[test]
    fn rates_must_be_finite_nonnegative() {
        assert!(RateSet::new([0.0, 0.1, -0.1, 0.0, 0.0, 0.0]).is_err());
        assert!(RateSet::new([0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(ParameterSpace::uniform(0.0).is_err());
        assert!(ParameterSpace::uniform(1.0).is_err());
    }

    #[test]
    fn scheme_validation() {
        assert!(ObservationScheme::default().validate().is_ok());
        let bad = ObservationScheme {
            entry: EntryDistribution::Uniform { lo: 0.0, hi: 60.0 },
            ..ObservationScheme::default()
        };
        assert!(bad.validate().is_err());
        let bad_window = ObservationScheme {
            window: 70.0,
            ..ObservationScheme::default()
        };
        assert!(bad_window.validate().is_err());
    }

    #[test]
    fn entry_window_probability() {
        let u = EntryDistribution::Uniform { lo: 0.0, hi: 54.0 };
        assert!((u.prob_in(21.0, 30.0) - 9.0 / 54.0).abs() < 1e-15);
        assert!((u.prob_in(-9.0, 0.0)).abs() < 1e-15);
        let e = u.expect(&[], |x| x);
        assert!((e - 27.0).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_covers_each_age_once(t in 1e-9f64..63.0) {
                let p = age_group_partition();
                let l = p.interval_of(t).unwrap();
                let (lo, hi) = p.bounds(l);
                prop_assert!(lo < t && t <= hi);
                let hits = (0..p.len()).filter(|&k| { let (a, b) = p.bounds(k); a < t && t <= b }).count();
                prop_assert_eq!(hits, 1);
            }

            #[test]
            fn single_interval_reproduces_rateset(t in 1e-9f64..63.0, r in 0.0f64..1.0) {
                let rates = RateSet::from_pairs(&[(TransitionKind::HD, r)]).unwrap();
                let pw = PiecewiseRateSet::homogeneous(rates, 63.0).unwrap();
                prop_assert_eq!(pw.rate_at(TransitionKind::HD, t).unwrap(), r);
            }
        }
    }
}
