//! Closed-form maximum-likelihood estimates `λ̂ = N / E` with observed
//! information standard errors `sqrt(N) / E`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::aggregate::{Aggregates, IntervalAggregates, MortalityAggregates};
use crate::error::{Error, Result};
use crate::inference::wald_ci;
use crate::model::{Partition, TransitionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Homogeneous,
    Piecewise,
    Mortality,
}

/// What a fitted parameter is the intensity of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Intensity {
    Transition(TransitionKind),
    /// Alive → dead in the two-state mortality model.
    Mortality,
}

impl Intensity {
    pub fn label(self) -> &'static str {
        match self {
            Intensity::Transition(hj) => hj.label(),
            Intensity::Mortality => "Ad",
        }
    }
}

impl fmt::Display for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Intensity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "Ad" {
            Ok(Intensity::Mortality)
        } else {
            s.parse().map(Intensity::Transition)
        }
    }
}

impl Serialize for Intensity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Ok,
    ZeroEvents,
    UndefinedNoExposure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamEstimate {
    pub intensity: Intensity,
    /// Age interval `]lo, hi]` in years since 50 the rate applies to.
    pub interval: (f64, f64),
    pub events: u64,
    pub exposure: f64,
    /// `None` without exposure.
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub status: FitStatus,
}

impl ParamEstimate {
    pub fn from_counts(intensity: Intensity, interval: (f64, f64), events: u64, exposure: f64) -> Self {
        let (estimate, se, status) = if exposure > 0.0 {
            let n = events as f64;
            let status = if events == 0 { FitStatus::ZeroEvents } else { FitStatus::Ok };
            (Some(n / exposure), Some(n.sqrt() / exposure), status)
        } else {
            (None, None, FitStatus::UndefinedNoExposure)
        };
        ParamEstimate {
            intensity,
            interval,
            events,
            exposure,
            estimate,
            se,
            status,
        }
    }

    /// `(estimate, se)` unless the cell has no exposure.
    pub fn value(&self) -> Result<(f64, f64)> {
        match (self.estimate, self.se) {
            (Some(e), Some(s)) => Ok((e, s)),
            _ => Err(Error::refused(format!(
                "{} on ]{}, {}] has no exposure",
                self.intensity, self.interval.0, self.interval.1
            ))),
        }
    }

    pub fn ci(&self, level: f64) -> Result<(f64, f64)> {
        let (e, s) = self.value()?;
        wald_ci(e, s, level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    /// SHA-256 over the input files, hex.
    pub input_digest: String,
    pub config: String,
}

impl Provenance {
    pub fn from_inputs<'a>(inputs: impl IntoIterator<Item = &'a [u8]>, config: impl Into<String>) -> Self {
        let mut hasher = Sha256::new();
        for bytes in inputs {
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes);
        }
        let input_digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Provenance {
            input_digest,
            config: config.into(),
        }
    }
}

/// Extra statistics reported by the mortality fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MortalitySummary {
    pub uncensored: u64,
    pub censored: u64,
    pub uncensored_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub params: Vec<ParamEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mortality: Option<MortalitySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl FitResult {
    pub fn get(&self, intensity: Intensity) -> Option<&ParamEstimate> {
        self.params.iter().find(|p| p.intensity == intensity)
    }

    pub fn transition(&self, hj: TransitionKind) -> Option<&ParamEstimate> {
        self.get(Intensity::Transition(hj))
    }

    /// All cells of one intensity in interval order.
    pub fn series(&self, intensity: Intensity) -> Vec<&ParamEstimate> {
        let mut cells: Vec<_> = self.params.iter().filter(|p| p.intensity == intensity).collect();
        cells.sort_by(|a, b| a.interval.0.total_cmp(&b.interval.0));
        cells
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }
}

/// One estimate per transition over `]0, tau]`.
pub fn fit_homogeneous(agg: &Aggregates, tau: f64) -> FitResult {
    let params = TransitionKind::ALL
        .into_iter()
        .map(|hj| {
            ParamEstimate::from_counts(Intensity::Transition(hj), (0.0, tau), agg.count(hj), agg.exposure(hj.from()))
        })
        .collect();
    FitResult {
        model: ModelKind::Homogeneous,
        params,
        mortality: None,
        provenance: None,
    }
}

/// One estimate per transition and interval, transition-major.
pub fn fit_piecewise(agg: &IntervalAggregates) -> FitResult {
    let p: &Partition = agg.partition();
    let params = TransitionKind::ALL
        .into_iter()
        .flat_map(|hj| {
            (0..p.len()).map(move |l| {
                ParamEstimate::from_counts(
                    Intensity::Transition(hj),
                    p.bounds(l),
                    agg.count(hj, l),
                    agg.exposure(hj.from(), l),
                )
            })
        })
        .collect();
    FitResult {
        model: ModelKind::Piecewise,
        params,
        mortality: None,
        provenance: None,
    }
}

/// `λ̂ = N_uncens / (Σ (T_i - U_i) + follow-up of the censored)`.
pub fn fit_mortality(agg: &MortalityAggregates, tau: f64) -> FitResult {
    let param = ParamEstimate::from_counts(Intensity::Mortality, (0.0, tau), agg.deaths(), agg.exposure());
    FitResult {
        model: ModelKind::Mortality,
        params: vec![param],
        mortality: Some(MortalitySummary {
            uncensored: agg.deaths(),
            censored: agg.censored(),
            uncensored_time: agg.death_time(),
        }),
        provenance: None,
    }
}

/// Hand-built aggregates for a single transition, convenient for published
/// `(N, E)` pairs.
pub fn single_transition_aggregates(hj: TransitionKind, events: u64, exposure: f64) -> Result<Aggregates> {
    Aggregates::from_parts(&[(hj, events)], &[(hj.from(), exposure)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{aggregate_homogeneous, aggregate_mortality, aggregate_piecewise};
    use crate::cohort::{ObservedRecord, SurvivalRecord};
    use crate::likelihood::{loglik, numeric_mle_rates};
    use crate::model::{ObservationScheme, ParameterSpace, PiecewiseRateSet, RateSet, State};
    use crate::sim::sample_cohort;

    fn round_to(x: f64, digits: i32) -> f64 {
        let s = 10f64.powi(digits);
        (x * s).round() / s
    }

    #[test]
    fn published_homogeneous_rows() {
        let a = single_transition_aggregates(TransitionKind::S1D, 8105, 115_566.0).unwrap();
        let p = fit_homogeneous(&a, 63.0).transition(TransitionKind::S1D).unwrap().clone();
        assert_eq!(round_to(p.estimate.unwrap(), 4), 0.0701);
        assert_eq!(round_to(p.se.unwrap(), 5), 0.00078);
        let a = single_transition_aggregates(TransitionKind::HD, 41_775, 1_997_092.0).unwrap();
        let p = fit_homogeneous(&a, 63.0).transition(TransitionKind::HD).unwrap().clone();
        assert_eq!(round_to(p.estimate.unwrap(), 4), 0.0209);
        assert_eq!(round_to(p.se.unwrap(), 6), 0.000102);
    }

    #[test]
    fn zero_events_and_no_exposure() {
        let a = single_transition_aggregates(TransitionKind::S1D, 0, 2.0).unwrap();
        let fit = fit_homogeneous(&a, 63.0);
        let p = fit.transition(TransitionKind::S1D).unwrap();
        assert_eq!((p.estimate, p.se, p.status), (Some(0.0), Some(0.0), FitStatus::ZeroEvents));
        let d = fit.transition(TransitionKind::DDEAD).unwrap();
        assert_eq!(d.status, FitStatus::UndefinedNoExposure);
        assert!(d.ci(0.95).is_err());
    }

    #[test]
    fn published_age_group_cells() {
        let p = Partition::regular(5.0, 63.0).unwrap();
        let mut cells = vec![Aggregates::new(); 13];
        cells[6] = Aggregates::from_parts(
            &[(TransitionKind::S1D, 1584), (TransitionKind::HD, 9151)],
            &[(State::Stroke, 18_496.0), (State::Healthy, 188_161.0)],
        )
        .unwrap();
        let fit = fit_piecewise(&IntervalAggregates::from_cells(p, cells).unwrap());
        let s1d = fit.series(Intensity::Transition(TransitionKind::S1D));
        assert_eq!(s1d.len(), 13);
        assert_eq!(s1d[6].interval, (30.0, 35.0));
        assert_eq!(round_to(s1d[6].estimate.unwrap(), 4), 0.0856);
        assert_eq!(round_to(s1d[6].se.unwrap(), 4), 0.0022);
        let hd = fit.series(Intensity::Transition(TransitionKind::HD));
        assert_eq!(round_to(hd[6].estimate.unwrap(), 4), 0.0486);
        assert_eq!(round_to(hd[6].se.unwrap(), 4), 0.0005);
        assert_eq!(hd[12].status, FitStatus::UndefinedNoExposure);
    }

    #[test]
    fn mortality_cases() {
        let m = MortalityAggregates::from_published(43_472, 180_163.0, 202_407, 9.0).unwrap();
        let fit = fit_mortality(&m, 63.0);
        let (est, se) = fit.params[0].value().unwrap();
        assert_eq!(round_to(est, 4), 0.0217);
        assert_eq!(round_to(se, 6), 0.000104);

        let one = aggregate_mortality(&[SurvivalRecord::new(0.0, 2.0, true).unwrap()]);
        assert_eq!(fit_mortality(&one, 63.0).params[0].value().unwrap(), (0.5, 0.5));

        let censored = aggregate_mortality(&[SurvivalRecord::new(0.0, 9.0, false).unwrap()]);
        assert_eq!(fit_mortality(&censored, 63.0).params[0].value().unwrap(), (0.0, 0.0));

        let empty = aggregate_mortality(&[]);
        assert_eq!(fit_mortality(&empty, 63.0).params[0].status, FitStatus::UndefinedNoExposure);
    }

    fn sim_records() -> Vec<ObservedRecord> {
        let r = RateSet::new([0.02, 0.09, 0.03, 0.03, 0.07, 0.2]).unwrap();
        let pw = PiecewiseRateSet::homogeneous(r, 63.0).unwrap();
        sample_cohort(&pw, &ObservationScheme::default(), 5000, 77).unwrap().records
    }

    #[test]
    fn collapsed_mortality_equals_two_state_homogeneous() {
        let recs = sim_records();
        let surv: Vec<_> = recs.iter().map(ObservedRecord::to_survival).collect();
        let mort = fit_mortality(&aggregate_mortality(&surv), 63.0);
        let collapsed: Vec<_> = recs.iter().map(ObservedRecord::collapse_alive).collect();
        let two = fit_homogeneous(&aggregate_homogeneous(&collapsed), 63.0);
        let a = &mort.params[0];
        let b = two.transition(TransitionKind::HDEAD).unwrap();
        assert_eq!((a.events, a.exposure, a.estimate, a.se), (b.events, b.exposure, b.estimate, b.se));
    }

    #[test]
    fn single_interval_piecewise_equals_homogeneous() {
        let recs = sim_records();
        let hom = fit_homogeneous(&aggregate_homogeneous(&recs), 63.0);
        let pw = fit_piecewise(&aggregate_piecewise(&recs, &Partition::single(63.0).unwrap()).unwrap());
        assert_eq!(hom.params, pw.params);
    }

    #[test]
    fn closed_form_is_score_root() {
        let recs = sim_records();
        let agg = aggregate_homogeneous(&recs);
        let fit = fit_homogeneous(&agg, 63.0);
        let mut rates = RateSet::zero();
        for p in &fit.params {
            if let Intensity::Transition(hj) = p.intensity {
                rates.set(hj, p.estimate.unwrap()).unwrap();
            }
        }
        let v = loglik(&agg, &rates);
        for hj in TransitionKind::ALL {
            let scale = agg.exposure(hj.from());
            assert!(v.score[hj.index()].abs() <= 1e-10 * scale, "{hj}");
        }
        let (numeric, _) = numeric_mle_rates(&agg, &ParameterSpace::default());
        for hj in TransitionKind::ALL {
            let closed = rates.get(hj);
            assert!((numeric.get(hj) - closed).abs() <= 1e-8 * closed, "{hj}");
        }
    }

    #[test]
    fn provenance_digest_is_stable() {
        let a = Provenance::from_inputs([b"abc".as_slice(), b"d".as_slice()], "cfg");
        let b = Provenance::from_inputs([b"abc".as_slice(), b"d".as_slice()], "cfg");
        let c = Provenance::from_inputs([b"ab".as_slice(), b"cd".as_slice()], "cfg");
        assert_eq!(a, b);
        assert_ne!(a.input_digest, c.input_digest);
        assert_eq!(a.input_digest.len(), 64);
    }
}
