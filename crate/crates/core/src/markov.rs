//! Exact transition probabilities of the Markov process.
//!
//! `P(t) = exp(Q t)` for the 4×4 generator `Q` is evaluated by scaling and
//! squaring of a Taylor expansion; piecewise-constant rates multiply the
//! per-interval matrices in age order. The results serve as the oracle for
//! the simulator and give the observation probability `β = P(X_U ≠ d)`.

use crate::error::{Error, Result};
use crate::model::{EntryDistribution, ObservationScheme, PiecewiseRateSet, RateSet, State, TransitionKind};

pub type Matrix4 = [[f64; 4]; 4];

pub const IDENTITY: Matrix4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

pub fn generator(rates: &RateSet) -> Matrix4 {
    let mut q = [[0.0; 4]; 4];
    for hj in TransitionKind::ALL {
        let (h, j) = (hj.from().index(), hj.to().index());
        q[h][j] += rates.get(hj);
        q[h][h] -= rates.get(hj);
    }
    q
}

pub fn matmul(a: &Matrix4, b: &Matrix4) -> Matrix4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..4 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

fn expm(q: &Matrix4, t: f64) -> Matrix4 {
    let norm = q
        .iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * t;
    if norm == 0.0 {
        return IDENTITY;
    }
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let scale = t / 2f64.powi(squarings);
    let a: Matrix4 = q.map(|row| row.map(|x| x * scale));

    // Taylor series of exp(A) with ||A|| <= 1/4; 20 terms is far below eps.
    let mut result = IDENTITY;
    let mut term = IDENTITY;
    for k in 1..=20 {
        term = matmul(&term, &a).map(|row| row.map(|x| x / k as f64));
        for i in 0..4 {
            for j in 0..4 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

/// `P(t)` for age-homogeneous rates.
pub fn transition_matrix(rates: &RateSet, t: f64) -> Result<Matrix4> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("transition matrix needs t >= 0, got {t}")));
    }
    Ok(expm(&generator(rates), t))
}

/// `P(0, t)` for piecewise-constant rates, `0 <= t <= τ`.
pub fn transition_matrix_piecewise(rates: &PiecewiseRateSet, t: f64) -> Result<Matrix4> {
    transition_matrix_between(rates, 0.0, t)
}

/// `P(s, t)`: law of `X_t` given `X_s`, for `0 <= s <= t <= τ`.
pub fn transition_matrix_between(rates: &PiecewiseRateSet, s: f64, t: f64) -> Result<Matrix4> {
    let tau = rates.tau();
    if !(0.0 <= s && s <= t && t <= tau) {
        return Err(Error::domain(format!("need 0 <= s <= t <= {tau}, got s={s}, t={t}")));
    }
    let partition = rates.partition();
    let mut p = IDENTITY;
    for l in 0..partition.len() {
        let (lo, hi) = partition.bounds(l);
        let a = lo.max(s);
        let b = hi.min(t);
        if b > a {
            p = matmul(&p, &expm(&generator(rates.interval(l)), b - a));
        }
    }
    Ok(p)
}

/// `β = P(X_U ≠ d)` by quadrature over the entry-age distribution.
pub fn observation_probability(rates: &PiecewiseRateSet, entry: &EntryDistribution) -> Result<f64> {
    let (lo, hi) = entry.support();
    if lo < 0.0 || hi > rates.tau() {
        return Err(Error::domain("entry-age support exceeds the rate horizon"));
    }
    let h = State::Healthy.index();
    // Summing the living states keeps precision when β is tiny.
    Ok(entry.expect(rates.partition().breaks(), |u| {
        let p = transition_matrix_piecewise(rates, u).expect("u within support checked above");
        State::LIVING.iter().map(|s| p[h][s.index()]).sum()
    }))
}

/// Model value of `m_h(t)`, the limiting fraction of the observed sample that
/// is at risk in state `h` at age `t`: `P(X_t = h) P(t - w <= U < t) / β`.
pub fn model_at_risk_fraction(
    rates: &PiecewiseRateSet,
    scheme: &ObservationScheme,
    beta: f64,
    h: State,
    t: f64,
) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::refused("observation probability is zero"));
    }
    if !(0.0..=rates.tau()).contains(&t) {
        return Ok(0.0);
    }
    let p = transition_matrix_piecewise(rates, t)?;
    Ok(p[State::Healthy.index()][h.index()] * scheme.entry.prob_in(t - scheme.window, t) / beta)
}
