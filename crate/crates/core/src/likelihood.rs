//! Conditional log-likelihood, score and Hessian diagonal of the three model
//! variants, plus a numeric maximizer used as an oracle for the closed forms.
//!
//! Terms that do not depend on the intensities (the `log Y` terms, which are
//! zero at jump times) are dropped, so only differences of log-likelihood
//! values are meaningful across tools.
//!
//! All three likelihoods separate into per-parameter terms
//! `N log λ - λ E`, so the Hessian is diagonal.

use serde::Serialize;

use crate::aggregate::{Aggregates, IntervalAggregates, MortalityAggregates};
use crate::cohort::SurvivalRecord;
use crate::error::{Error, Result};
use crate::model::{ParameterSpace, PiecewiseRateSet, RateSet, TransitionKind};

/// Log-likelihood value, `LogZero` when some `λ = 0` carries events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LogDensity {
    Finite(f64),
    LogZero,
}

impl LogDensity {
    pub fn as_f64(self) -> f64 {
        match self {
            LogDensity::Finite(v) => v,
            LogDensity::LogZero => f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLikValue {
    pub value: LogDensity,
    pub score: Vec<f64>,
    pub hessian: Vec<f64>,
}

/// One separable term `N log λ - λ E` with its first two derivatives.
fn term(events: u64, exposure: f64, rate: f64) -> (Option<f64>, f64, f64) {
    let n = events as f64;
    if events == 0 {
        return (Some(-rate * exposure), -exposure, 0.0);
    }
    if rate == 0.0 {
        return (None, f64::INFINITY, f64::NEG_INFINITY);
    }
    (Some(n * rate.ln() - rate * exposure), n / rate - exposure, -n / (rate * rate))
}

fn collect(terms: impl Iterator<Item = (Option<f64>, f64, f64)>) -> LogLikValue {
    let mut value = Some(0.0);
    let mut score = Vec::new();
    let mut hessian = Vec::new();
    for (v, s, h) in terms {
        value = value.zip(v).map(|(a, b)| a + b);
        score.push(s);
        hessian.push(h);
    }
    LogLikValue {
        value: value.map_or(LogDensity::LogZero, LogDensity::Finite),
        score,
        hessian,
    }
}

/// Parameters ordered as [`TransitionKind::ALL`].
pub fn loglik(agg: &Aggregates, rates: &RateSet) -> LogLikValue {
    collect(
        TransitionKind::ALL
            .into_iter()
            .map(|hj| term(agg.count(hj), agg.exposure(hj.from()), rates.get(hj))),
    )
}

/// Parameters ordered interval-major: index `6 l + hj.index()`.
pub fn loglik_piecewise(agg: &IntervalAggregates, rates: &PiecewiseRateSet) -> Result<LogLikValue> {
    if agg.partition() != rates.partition() {
        return Err(Error::domain("aggregates and rates use different partitions"));
    }
    let b = agg.partition().len();
    Ok(collect((0..b).flat_map(|l| {
        TransitionKind::ALL
            .into_iter()
            .map(move |hj| term(agg.count(hj, l), agg.exposure(hj.from(), l), rates.get(hj, l)))
    })))
}

/// Two-state mortality model: `N_uncens log λ - λ (Σ (T_i - U_i) + follow-up of censored)`.
pub fn loglik_mortality(agg: &MortalityAggregates, rate: f64) -> Result<LogLikValue> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::domain(format!("mortality rate must be > 0, got {rate}")));
    }
    Ok(collect(std::iter::once(term(agg.deaths(), agg.exposure(), rate))))
}

pub fn loglik_survival(records: &[SurvivalRecord], rate: f64) -> Result<LogLikValue> {
    loglik_mortality(&crate::aggregate::aggregate_mortality(records), rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoordinateOptimum {
    pub argmax: f64,
    pub boundary: Option<Boundary>,
}

/// Maximizes a separable log-likelihood one coordinate at a time on the box
/// `bounds`. Each coordinate is located as the sign change of its score with
/// Brent's bracketing root finder, which is the interior maximum of a concave
/// coordinate; when the score does not change sign the maximum is at a bound.
pub fn numeric_mle<F>(f: F, bounds: &[(f64, f64)]) -> Vec<CoordinateOptimum>
where
    F: Fn(&[f64]) -> LogLikValue,
{
    let base: Vec<f64> = bounds.iter().map(|&(lo, hi)| (lo * hi).sqrt()).collect();
    bounds
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| {
            let score = |x: f64| {
                let mut p = base.clone();
                p[k] = x;
                f(&p).score[k]
            };
            let (s_lo, s_hi) = (score(lo), score(hi));
            if s_lo <= 0.0 {
                CoordinateOptimum { argmax: lo, boundary: Some(Boundary::Lower) }
            } else if s_hi >= 0.0 {
                CoordinateOptimum { argmax: hi, boundary: Some(Boundary::Upper) }
            } else {
                CoordinateOptimum { argmax: brent_root(score, lo, hi, s_lo, s_hi, 0.0), boundary: None }
            }
        })
        .collect()
}

/// Homogeneous rates maximizing [`loglik`] within `space`.
pub fn numeric_mle_rates(agg: &Aggregates, space: &ParameterSpace) -> (RateSet, Vec<CoordinateOptimum>) {
    let bounds: Vec<_> = TransitionKind::ALL.iter().map(|&hj| space.bounds(hj)).collect();
    let opt = numeric_mle(
        |p| {
            let mut arr = [0.0; 6];
            arr.copy_from_slice(p);
            loglik(agg, &RateSet::new(arr).expect("rates within positive bounds"))
        },
        &bounds,
    );
    let mut arr = [0.0; 6];
    for (a, o) in arr.iter_mut().zip(&opt) {
        *a = o.argmax;
    }
    (RateSet::new(arr).expect("positive"), opt)
}

/// Brent–Dekker root finding on a bracket with `f(a) f(b) < 0`. Converges
/// until the bracket is within `4 eps |x| + xtol`.
fn brent_root(f: impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fb: f64, xtol: f64) -> f64 {
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}
