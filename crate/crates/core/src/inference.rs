//! Wald confidence intervals and contrasts of asymptotically independent
//! intensity estimates.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::estimate::{FitResult, FitStatus, Intensity, ParamEstimate};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile probability {p} not in (0, 1)")));
    }
    Ok(Normal::standard().inverse_cdf(p))
}

/// `z_{1-α/2}` for a two-sided interval at confidence `level`.
pub fn critical_value(level: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::domain(format!("confidence level {level} not in [0, 1)")));
    }
    normal_quantile(0.5 + level / 2.0)
}

/// `estimate ± z · se`; not truncated at zero.
pub fn wald_ci(estimate: f64, se: f64, level: f64) -> Result<(f64, f64)> {
    if !(se >= 0.0) {
        return Err(Error::domain(format!("standard error must be >= 0, got {se}")));
    }
    let z = critical_value(level)?;
    Ok((estimate - z * se, estimate + z * se))
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContrastResult {
    pub difference: f64,
    pub se: f64,
    pub variance: f64,
    pub level: f64,
    pub ci: (f64, f64),
    pub z: f64,
    pub p_value: f64,
}

impl ContrastResult {
    pub fn significant(&self) -> bool {
        self.ci.0 > 0.0 || self.ci.1 < 0.0
    }
}

/// Difference `first - second` of two independent estimates; the variance of
/// the difference is the sum of the variances.
pub fn contrast_values(first: (f64, f64), second: (f64, f64), level: f64) -> Result<ContrastResult> {
    let difference = first.0 - second.0;
    let variance = first.1 * first.1 + second.1 * second.1;
    let se = variance.sqrt();
    let ci = wald_ci(difference, se, level)?;
    let z = if se > 0.0 {
        difference / se
    } else if difference == 0.0 {
        0.0
    } else {
        difference.signum() * f64::INFINITY
    };
    Ok(ContrastResult {
        difference,
        se,
        variance,
        level,
        ci,
        z,
        p_value: two_sided_p(z),
    })
}

/// Contrast of two fitted parameters; refuses cells without exposure.
pub fn contrast(first: &ParamEstimate, second: &ParamEstimate, level: f64) -> Result<ContrastResult> {
    contrast_values(first.value()?, second.value()?, level)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AgeTest {
    Tested(ContrastResult),
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgeTestRow {
    pub interval: (f64, f64),
    #[serde(flatten)]
    pub test: AgeTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseTests {
    pub first: Intensity,
    pub second: Intensity,
    pub level: f64,
    /// Number of tests actually carried out; no multiplicity correction.
    pub comparisons: usize,
    pub rows: Vec<AgeTestRow>,
}

/// Per-interval Wald tests of `first - second` on a common partition.
pub fn pairwise_age_tests(fit: &FitResult, first: Intensity, second: Intensity, level: f64) -> Result<PairwiseTests> {
    critical_value(level)?;
    let a = fit.series(first);
    let b = fit.series(second);
    if a.is_empty() || b.is_empty() {
        return Err(Error::refused(format!("fit lacks {first} or {second}")));
    }
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.interval != y.interval) {
        return Err(Error::domain(format!("{first} and {second} are fitted on different partitions")));
    }
    let rows: Vec<AgeTestRow> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| {
            let test = if x.status != FitStatus::Ok || y.status != FitStatus::Ok {
                AgeTest::Skipped {
                    reason: format!("status {:?} / {:?}", x.status, y.status),
                }
            } else {
                AgeTest::Tested(contrast(x, y, level).expect("ok-status cells have values"))
            };
            AgeTestRow {
                interval: x.interval,
                test,
            }
        })
        .collect();
    let comparisons = rows.iter().filter(|r| matches!(r.test, AgeTest::Tested(_))).count();
    Ok(PairwiseTests {
        first,
        second,
        level,
        comparisons,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TransitionKind;

    #[test]
    fn quantile_known_values() {
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let mut p = 1e-8;
        while p < 1.0 - 1e-8 {
            let x = normal_quantile(p).unwrap();
            assert!((normal_cdf(x) - p).abs() <= 1e-9, "p={p}");
            p = if p < 0.01 { p * 1.7 } else { p + 0.0037 };
        }
        let x = normal_quantile(1.0 - 1e-8).unwrap();
        assert!((normal_cdf(x) - (1.0 - 1e-8)).abs() <= 1e-9);
    }

    #[test]
    fn published_difference_half_width() {
        let (lo, hi) = wald_ci(0.0492, 0.000785, 0.95).unwrap();
        assert!(((hi - lo) / 2.0 - 0.00154).abs() < 0.000005);
    }

    #[test]
    fn degenerate_intervals() {
        assert_eq!(wald_ci(0.3, 0.0, 0.95).unwrap(), (0.3, 0.3));
        assert_eq!(wald_ci(0.3, 0.1, 0.0).unwrap(), (0.3, 0.3));
        assert!(wald_ci(0.3, 0.1, 1.0).is_err());
    }

    #[test]
    fn contrast_arithmetic() {
        let c = contrast_values((0.1, 0.003), (0.09, 0.004), 0.95).unwrap();
        assert!((c.se - 0.005).abs() < 1e-15);
        assert!((c.z - 2.0).abs() < 1e-12);
        let same = contrast_values((0.1, 0.003), (0.1, 0.003), 0.95).unwrap();
        assert_eq!((same.difference, same.z, same.p_value), (0.0, 0.0, 1.0));
    }

    #[test]
    fn published_difference_contrast() {
        let c = contrast_values((8105.0 / 115_566.0, 8105f64.sqrt() / 115_566.0), (41_775.0 / 1_997_092.0, 41_775f64.sqrt() / 1_997_092.0), 0.95).unwrap();
        assert!((c.difference - 0.0492).abs() < 0.00005);
        assert!((c.variance / 0.000000617 - 1.0).abs() < 0.02);
        assert!((c.se / 0.000785 - 1.0).abs() < 0.01);
    }

    #[test]
    fn no_exposure_is_refused() {
        let ok = ParamEstimate::from_counts(Intensity::Transition(TransitionKind::HD), (0.0, 63.0), 4, 27.0);
        let na = ParamEstimate::from_counts(Intensity::Transition(TransitionKind::S1D), (0.0, 63.0), 0, 0.0);
        assert!(matches!(contrast(&ok, &na, 0.95), Err(Error::Refused(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ci_widens_with_level(e in -1.0f64..1.0, s in 1e-6f64..1.0, l1 in 0.01f64..0.98, dl in 0.001f64..0.01) {
                let (a, b) = wald_ci(e, s, l1).unwrap();
                let (c, d) = wald_ci(e, s, l1 + dl).unwrap();
                prop_assert!(c < a && d > b);
            }

            #[test]
            fn contrast_antisymmetry(e1 in 0.0f64..1.0, s1 in 1e-4f64..0.1, e2 in 0.0f64..1.0, s2 in 1e-4f64..0.1) {
                let ab = contrast_values((e1, s1), (e2, s2), 0.95).unwrap();
                let ba = contrast_values((e2, s2), (e1, s1), 0.95).unwrap();
                prop_assert_eq!(ab.difference, -ba.difference);
                prop_assert_eq!(ab.z, -ba.z);
                prop_assert_eq!(ab.p_value, ba.p_value);
                prop_assert!(((ab.ci.1 - ab.ci.0) - (ba.ci.1 - ba.ci.0)).abs() < 1e-15);
            }
        }
    }
}
