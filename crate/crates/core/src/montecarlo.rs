//! Monte Carlo checks of the large-sample behaviour of the estimators:
//! interval coverage, bias, agreement of reported and empirical spread,
//! normality of `sqrt(n_all)(λ̂ - λ₀)`, and `n_all^{-1/2}` consistency.

use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::{aggregate_homogeneous, aggregate_mortality, aggregate_piecewise};
use crate::cohort::SurvivalRecord;
use crate::error::{Error, Result};
use crate::estimate::{fit_homogeneous, fit_mortality, fit_piecewise, FitResult, FitStatus, Intensity, ModelKind};
use crate::inference::{critical_value, normal_cdf};
use crate::io::RunConfig;
use crate::markov::{model_at_risk_fraction, observation_probability};
use crate::model::{State, TransitionKind};
use crate::rng::derive_seed;
use crate::sim::{sample_cohort, Cohort};

/// One estimated quantity together with its true value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Target {
    pub intensity: Intensity,
    pub interval: (f64, f64),
    pub truth: f64,
}

/// True values of every parameter the configured model estimates, in fit
/// order. Fails when the model cannot represent the configured rates.
pub fn targets(config: &RunConfig) -> Result<Vec<Target>> {
    let rates = &config.rates;
    let p = rates.partition();
    let tau = config.scheme.tau;
    let constant = |hj: TransitionKind| -> Option<f64> {
        let v = rates.get(hj, 0);
        (0..p.len()).all(|l| rates.get(hj, l) == v).then_some(v)
    };
    match config.model {
        ModelKind::Piecewise => Ok(TransitionKind::ALL
            .into_iter()
            .flat_map(|hj| {
                (0..p.len()).map(move |l| Target {
                    intensity: Intensity::Transition(hj),
                    interval: p.bounds(l),
                    truth: rates.get(hj, l),
                })
            })
            .collect()),
        ModelKind::Homogeneous => TransitionKind::ALL
            .into_iter()
            .map(|hj| {
                let truth = constant(hj).ok_or_else(|| {
                    Error::domain(format!("rate {hj} varies with age; fit a piecewise model"))
                })?;
                Ok(Target {
                    intensity: Intensity::Transition(hj),
                    interval: (0.0, tau),
                    truth,
                })
            })
            .collect(),
        ModelKind::Mortality => {
            let positive = |hj: TransitionKind| (0..p.len()).any(|l| rates.get(hj, l) > 0.0);
            let stroke = positive(TransitionKind::HS1);
            let dementia = positive(TransitionKind::HD) || (stroke && positive(TransitionKind::S1D));
            let deaths: Vec<TransitionKind> = [
                Some(TransitionKind::HDEAD),
                stroke.then_some(TransitionKind::S1DEAD),
                dementia.then_some(TransitionKind::DDEAD),
            ]
            .into_iter()
            .flatten()
            .collect();
            let truth = constant(deaths[0]).filter(|&v| deaths.iter().all(|&hj| constant(hj) == Some(v)));
            let truth = truth.ok_or_else(|| {
                Error::domain("the two-state model needs one constant death rate shared by all reachable living states")
            })?;
            Ok(vec![Target {
                intensity: Intensity::Mortality,
                interval: (0.0, tau),
                truth,
            }])
        }
    }
}

fn fit_cohort(config: &RunConfig, cohort: &Cohort) -> Result<FitResult> {
    let tau = config.scheme.tau;
    Ok(match config.model {
        ModelKind::Homogeneous => fit_homogeneous(&aggregate_homogeneous(&cohort.records), tau),
        ModelKind::Piecewise => fit_piecewise(&aggregate_piecewise(&cohort.records, config.rates.partition())?),
        ModelKind::Mortality => {
            let surv: Vec<SurvivalRecord> = cohort.records.iter().map(|r| r.to_survival()).collect();
            fit_mortality(&aggregate_mortality(&surv), tau)
        }
    })
}

/// `β > 0`, checked by quadrature; returns `β`.
fn checked_beta(config: &RunConfig) -> Result<f64> {
    config.validate()?;
    let beta = observation_probability(&config.rates, &config.scheme.entry)?;
    if !(beta > 0.0) {
        return Err(Error::refused("observation probability is zero: everybody is dead before entry"));
    }
    Ok(beta)
}

struct Replicate {
    n: usize,
    /// `(estimate, se)` per target; `None` when the cell had no exposure.
    values: Vec<Option<(f64, f64)>>,
}

fn replicate(config: &RunConfig, n_all: usize, seed: u64, n_targets: usize) -> Result<Replicate> {
    let cohort = sample_cohort(&config.rates, &config.scheme, n_all, seed)?;
    let fit = fit_cohort(config, &cohort)?;
    debug_assert_eq!(fit.params.len(), n_targets);
    let values = fit
        .params
        .iter()
        .map(|p| match p.status {
            FitStatus::UndefinedNoExposure => None,
            _ => p.value().ok(),
        })
        .collect();
    Ok(Replicate {
        n: cohort.summary.n,
        values,
    })
}

fn run_replicates(config: &RunConfig, n_all: usize, seed: u64, reps: usize, n_targets: usize) -> Result<Vec<Replicate>> {
    (0..reps)
        .into_par_iter()
        .map(|r| replicate(config, n_all, derive_seed(seed, r as u64), n_targets))
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n - 1`); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Moment skewness and excess kurtosis; `NaN` for a constant sample.
pub fn skewness_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let moment = |k: i32| xs.iter().map(|x| (x - m).powi(k)).sum::<f64>() / n;
    let m2 = moment(2);
    if !(m2 > 0.0) {
        return (f64::NAN, f64::NAN);
    }
    (moment(3) / m2.powf(1.5), moment(4) / (m2 * m2) - 3.0)
}

/// Kolmogorov–Smirnov distance between the sample and `N(mean, sd²)` with
/// the sample's own mean and standard deviation.
pub fn ks_distance_normal(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let s = sample_sd(xs);
    if !(s > 0.0) {
        return 1.0;
    }
    let mut z: Vec<f64> = xs.iter().map(|x| (x - m) / s).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, &zi)| {
            let f = normal_cdf(zi);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov p-value of distance `d` from `n` points, with
/// Stephens' small-sample correction.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamCoverage {
    pub intensity: Intensity,
    pub interval: (f64, f64),
    pub truth: f64,
    /// Replications in which the cell had exposure.
    pub replications: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub mc_sd: f64,
    /// Monte Carlo standard error of the mean estimate, `mc_sd / sqrt(R)`.
    pub mc_se: f64,
    pub mean_se: f64,
    pub coverage: f64,
    /// Standard deviation of `sqrt(n_all)(λ̂ - λ₀)`.
    pub scaled_sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_distance: f64,
    pub ks_p_value: f64,
}

impl ParamCoverage {
    pub fn label(&self) -> String {
        format!("{}]{},{}]", self.intensity, self.interval.0, self.interval.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaSummary {
    /// `β` by quadrature over the transition matrix.
    pub quadrature: f64,
    /// Mean of `n / n_all` over replications.
    pub mean: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub model: ModelKind,
    pub level: f64,
    pub replications: usize,
    pub n_all: usize,
    /// Mean observed sample size.
    pub mean_n: f64,
    pub seed: u64,
    pub beta: BetaSummary,
    /// Parameters with zero truth are not reported.
    pub params: Vec<ParamCoverage>,
}

/// Acceptance bands applied by [`CoverageReport::violations`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Allowed absolute distance of empirical coverage from the nominal level.
    pub coverage_tol: f64,
    /// Allowed relative distance of the mean SE from the MC SD.
    pub se_rel_tol: f64,
    /// Allowed |bias| in units of the MC standard error.
    pub bias_mc_se: f64,
    pub ks_alpha: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            coverage_tol: 0.02,
            se_rel_tol: 0.10,
            bias_mc_se: 3.0,
            ks_alpha: 0.01,
        }
    }
}

impl CoverageReport {
    /// Human-readable descriptions of every band the report falls outside.
    pub fn violations(&self, t: &Thresholds) -> Vec<String> {
        let mut out = Vec::new();
        for p in &self.params {
            let label = p.label();
            if (p.coverage - self.level).abs() > t.coverage_tol {
                out.push(format!("{label}: coverage {:.4} outside {} ± {}", p.coverage, self.level, t.coverage_tol));
            }
            if (p.mean_se / p.mc_sd - 1.0).abs() > t.se_rel_tol {
                out.push(format!("{label}: mean SE {:.3e} vs MC SD {:.3e}", p.mean_se, p.mc_sd));
            }
            if p.bias.abs() > t.bias_mc_se * p.mc_se {
                out.push(format!("{label}: bias {:.3e} exceeds {} MC SE ({:.3e})", p.bias, t.bias_mc_se, p.mc_se));
            }
            if !(p.ks_p_value >= t.ks_alpha) {
                out.push(format!("{label}: KS p-value {:.4} < {}", p.ks_p_value, t.ks_alpha));
            }
        }
        let b = &self.beta;
        if (b.mean - b.quadrature).abs() > t.bias_mc_se * b.mc_se {
            out.push(format!("beta: MC mean {:.6} vs quadrature {:.6}", b.mean, b.quadrature));
        }
        out
    }
}

fn summarize(target: &Target, reps: &[Replicate], k: usize, n_all: usize, z: f64) -> ParamCoverage {
    let vals: Vec<(f64, f64)> = reps.iter().filter_map(|r| r.values[k]).collect();
    let est: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let r = vals.len();
    let covered = vals
        .iter()
        .filter(|(e, s)| (e - z * s..=e + z * s).contains(&target.truth))
        .count();
    let mean_estimate = mean(&est);
    let mc_sd = sample_sd(&est);
    let scaled: Vec<f64> = est.iter().map(|e| (n_all as f64).sqrt() * (e - target.truth)).collect();
    let (skewness, excess_kurtosis) = skewness_kurtosis(&scaled);
    let ks_distance = ks_distance_normal(&scaled);
    ParamCoverage {
        intensity: target.intensity,
        interval: target.interval,
        truth: target.truth,
        replications: r,
        mean_estimate,
        bias: mean_estimate - target.truth,
        mc_sd,
        mc_se: mc_sd / (r as f64).sqrt(),
        mean_se: mean(&vals.iter().map(|v| v.1).collect::<Vec<_>>()),
        coverage: if r == 0 { f64::NAN } else { covered as f64 / r as f64 },
        scaled_sd: sample_sd(&scaled),
        skewness,
        excess_kurtosis,
        ks_distance,
        ks_p_value: kolmogorov_p_value(ks_distance, r),
    }
}

/// Simulates `config.replications` independent cohorts, fits the configured
/// model to each and summarizes the Wald intervals at `level`.
///
/// Replication `r` uses seed `derive_seed(config.seed, r)`; results are
/// reduced in replication order, so the report is a pure function of the
/// configuration.
pub fn coverage_study(config: &RunConfig, level: f64) -> Result<CoverageReport> {
    let beta = checked_beta(config)?;
    let z = critical_value(level)?;
    let targets = targets(config)?;
    let reps = run_replicates(config, config.n_all, config.seed, config.replications, targets.len())?;
    let params = targets
        .iter()
        .enumerate()
        .filter(|(_, t)| t.truth > 0.0)
        .map(|(k, t)| summarize(t, &reps, k, config.n_all, z))
        .collect();
    let beta_hats: Vec<f64> = reps.iter().map(|r| r.n as f64 / config.n_all as f64).collect();
    Ok(CoverageReport {
        model: config.model,
        level,
        replications: config.replications,
        n_all: config.n_all,
        mean_n: mean(&reps.iter().map(|r| r.n as f64).collect::<Vec<_>>()),
        seed: config.seed,
        beta: BetaSummary {
            quadrature: beta,
            mean: mean(&beta_hats),
            mc_se: sample_sd(&beta_hats) / (beta_hats.len() as f64).sqrt(),
        },
        params,
    })
}

/// Applies the one-rerun rule to the normality diagnostic: every parameter
/// whose KS p-value in `first` is below `alpha` is checked again on a fresh
/// set of replications; those failing twice are returned.
pub fn confirmed_normality_failures(
    config: &RunConfig,
    level: f64,
    first: &CoverageReport,
    alpha: f64,
) -> Result<Vec<String>> {
    let failing: Vec<String> = first
        .params
        .iter()
        .filter(|p| !(p.ks_p_value >= alpha))
        .map(ParamCoverage::label)
        .collect();
    if failing.is_empty() {
        return Ok(failing);
    }
    let mut fresh = config.clone();
    fresh.seed = derive_seed(config.seed, u64::MAX);
    let second = coverage_study(&fresh, level)?;
    Ok(second
        .params
        .iter()
        .filter(|p| failing.contains(&p.label()) && !(p.ks_p_value >= alpha))
        .map(ParamCoverage::label)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmsePoint {
    pub n_all: usize,
    pub rmse: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseCurve {
    pub intensity: Intensity,
    pub interval: (f64, f64),
    pub truth: f64,
    pub points: Vec<RmsePoint>,
    /// Least-squares slope of `ln RMSE` on `ln n_all`.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub model: ModelKind,
    pub replications: usize,
    pub seed: u64,
    /// Parameters with zero truth are excluded.
    pub curves: Vec<RmseCurve>,
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// RMSE of every nonzero-truth parameter at each latent size, with
/// `replications` cohorts per size.
pub fn consistency_curve(config: &RunConfig, n_alls: &[usize], replications: usize) -> Result<ConsistencyReport> {
    checked_beta(config)?;
    if n_alls.len() < 2 || replications == 0 {
        return Err(Error::domain("need at least two sample sizes and one replication"));
    }
    let targets = targets(config)?;
    let runs: Vec<Vec<Replicate>> = n_alls
        .iter()
        .map(|&n_all| {
            let seed = derive_seed(config.seed, n_all as u64);
            run_replicates(config, n_all, seed, replications, targets.len())
        })
        .collect::<Result<_>>()?;
    let curves = targets
        .iter()
        .enumerate()
        .filter(|(_, t)| t.truth > 0.0)
        .map(|(k, t)| {
            let points: Vec<RmsePoint> = n_alls
                .iter()
                .zip(&runs)
                .map(|(&n_all, reps)| {
                    let sq: Vec<f64> = reps
                        .iter()
                        .filter_map(|r| r.values[k])
                        .map(|(e, _)| (e - t.truth).powi(2))
                        .collect();
                    RmsePoint {
                        n_all,
                        rmse: mean(&sq).sqrt(),
                        replications: sq.len(),
                    }
                })
                .collect();
            let lx: Vec<f64> = points.iter().map(|p| (p.n_all as f64).ln()).collect();
            let ly: Vec<f64> = points.iter().map(|p| p.rmse.ln()).collect();
            RmseCurve {
                intensity: t.intensity,
                interval: t.interval,
                truth: t.truth,
                slope: ls_slope(&lx, &ly),
                points,
            }
        })
        .collect();
    Ok(ConsistencyReport {
        model: config.model,
        replications,
        seed: config.seed,
        curves,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtRiskPoint {
    pub state: State,
    pub age: f64,
    /// Fraction of the observed sample at risk in `state` at `age`.
    pub empirical: f64,
    pub mc_se: f64,
    pub model: f64,
}

/// Fraction of observed persons under observation in each living state at
/// each grid age, from one cohort of `config.n_all`, next to its model value.
pub fn empirical_mh(config: &RunConfig, grid: &[f64]) -> Result<Vec<AtRiskPoint>> {
    let beta = checked_beta(config)?;
    let cohort = sample_cohort(&config.rates, &config.scheme, config.n_all, config.seed)?;
    let episodes: Vec<_> = cohort.records.iter().map(|r| r.episodes()).collect();
    let n = cohort.records.len() as f64;
    let mut out = Vec::new();
    for h in State::LIVING {
        for &t in grid {
            let count = episodes
                .iter()
                .filter(|eps| eps.iter().any(|e| e.state == h && e.start < t && t <= e.stop))
                .count() as f64;
            let p = if n > 0.0 { count / n } else { 0.0 };
            out.push(AtRiskPoint {
                state: h,
                age: t,
                empirical: p,
                mc_se: if n > 0.0 { (p * (1.0 - p) / n).sqrt() } else { 0.0 },
                model: model_at_risk_fraction(&config.rates, &config.scheme, beta, h, t)?,
            });
        }
    }
    Ok(out)
}
