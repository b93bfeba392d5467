//! Two-sided t-tests between per-sample error distributions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::loss::ErrorDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    /// On per-sample differences; requires aligned samples.
    #[default]
    Paired,
    /// Unequal-variance two-sample test.
    Welch,
}

impl std::str::FromStr for TTestVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paired" => Ok(TTestVariant::Paired),
            "welch" => Ok(TTestVariant::Welch),
            _ => Err(Error::InvalidArgument(format!(
                "unknown t-test variant {s:?}"
            ))),
        }
    }
}

/// Colour band used when plotting significance against the best entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignificanceBand {
    #[serde(rename = "p>.05")]
    NotSignificant,
    #[serde(rename = "p<.05")]
    P05,
    #[serde(rename = "p<.01")]
    P01,
}

impl SignificanceBand {
    pub fn from_p(p: f64) -> Self {
        if p < 0.01 {
            SignificanceBand::P01
        } else if p < 0.05 {
            SignificanceBand::P05
        } else {
            SignificanceBand::NotSignificant
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignificanceBand::NotSignificant => "p>.05",
            SignificanceBand::P05 => "p<.05",
            SignificanceBand::P01 => "p<.01",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub label_a: String,
    pub label_b: String,
    pub variant: TTestVariant,
    pub t_statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

impl TTestResult {
    pub fn band(&self) -> SignificanceBand {
        SignificanceBand::from_p(self.p_value)
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn two_sided_p(t: f64, df: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidArgument(format!("t distribution with df={df}: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

/// Two-sided test of equal means. The statistic is oriented as `a - b`.
///
/// A zero-variance comparison has `p = 1` when the means agree and is an
/// error otherwise (the statistic would be infinite).
pub fn t_test(
    a: &ErrorDistribution,
    b: &ErrorDistribution,
    variant: TTestVariant,
) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Empty(
            "t-test needs at least two samples per distribution".into(),
        ));
    }
    let (t, df) = match variant {
        TTestVariant::Paired => {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    what: "paired t-test samples",
                    left: a.len(),
                    right: b.len(),
                });
            }
            let diffs: Vec<f64> = a.errors.iter().zip(&b.errors).map(|(x, y)| x - y).collect();
            let (mean, var) = mean_var(&diffs);
            let n = diffs.len() as f64;
            if var == 0.0 || diffs.iter().all(|&d| d == diffs[0]) {
                if mean == 0.0 {
                    (0.0, n - 1.0)
                } else {
                    return Err(Error::ZeroVariance(format!(
                        "paired differences between {} and {} are constant ({mean})",
                        a.label, b.label
                    )));
                }
            } else {
                (mean / (var / n).sqrt(), n - 1.0)
            }
        }
        TTestVariant::Welch => {
            let (ma, va) = mean_var(&a.errors);
            let (mb, vb) = mean_var(&b.errors);
            let (na, nb) = (a.len() as f64, b.len() as f64);
            let (sa, sb) = (va / na, vb / nb);
            if sa + sb == 0.0 {
                if ma == mb {
                    (0.0, na + nb - 2.0)
                } else {
                    return Err(Error::ZeroVariance(format!(
                        "{} and {} are both constant with different means",
                        a.label, b.label
                    )));
                }
            } else {
                let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
                ((ma - mb) / (sa + sb).sqrt(), df)
            }
        }
    };
    Ok(TTestResult {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        variant,
        t_statistic: t,
        df,
        p_value: two_sided_p(t, df)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(label: &str, e: &[f64]) -> ErrorDistribution {
        ErrorDistribution {
            label: label.into(),
            delta: 1.0,
            errors: e.to_vec(),
        }
    }

    #[test]
    fn identical_samples() {
        let a = dist("a", &[0.1, 0.5, 0.2, 0.9]);
        for v in [TTestVariant::Paired, TTestVariant::Welch] {
            let r = t_test(&a, &a, v).unwrap();
            assert_eq!(r.t_statistic, 0.0);
            assert_eq!(r.p_value, 1.0);
            assert_eq!(r.band(), SignificanceBand::NotSignificant);
        }
    }

    #[test]
    fn constant_nonzero_difference_is_an_error() {
        let a = dist("a", &[2.0, 2.0, 2.0, 2.0]);
        let b = dist("b", &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            t_test(&a, &b, TTestVariant::Paired),
            Err(Error::ZeroVariance(_))
        ));
        let a = dist("a", &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = dist("b", &[2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(t_test(&a, &b, TTestVariant::Paired).is_err());
    }

    #[test]
    fn textbook_paired_example() {
        // diffs = [-1,-1,-1,-1,-2]: mean -1.2, s^2 = 0.8/4 = 0.2, se = sqrt(0.2/5) = 0.2
        // t = -6, df = 4; for nu = 4 the t CDF is closed-form:
        //   F(t) = 1/2 + (3/8) u (1 - u^2/12),  u = t / sqrt(1 + t^2/4)
        let a = dist("a", &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = dist("b", &[2.0, 3.0, 4.0, 5.0, 7.0]);
        let r = t_test(&a, &b, TTestVariant::Paired).unwrap();
        assert!((r.t_statistic + 6.0).abs() < 1e-9);
        assert_eq!(r.df, 4.0);
        let u = 6.0 / (1.0f64 + 9.0).sqrt();
        let upper = 0.5 - 0.375 * u * (1.0 - u * u / 12.0);
        assert!((r.p_value - 2.0 * upper).abs() < 1e-6, "{}", r.p_value);
        assert!((r.p_value - 0.003_882_537_046_960_5).abs() < 1e-6);
    }

    #[test]
    fn welch_example() {
        // hand-computed Welch statistic; p from the reference t tables:
        // a: mean 3, var 2.5 ; b: mean 6, var 10 ; n = 5 each
        // t = -3 / sqrt(0.5 + 2) = -1.897366596, df = 6.25 / (0.0625 + 1) = 5.882352941
        let a = dist("a", &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = dist("b", &[2.0, 4.0, 6.0, 8.0, 10.0]);
        let r = t_test(&a, &b, TTestVariant::Welch).unwrap();
        assert!((r.t_statistic + 1.897_366_596_101_028).abs() < 1e-9);
        assert!((r.df - 5.882_352_941_176_47).abs() < 1e-9);
        assert!((r.p_value - 0.107_531_194_930_627).abs() < 1e-6);
    }

    #[test]
    fn bands() {
        assert_eq!(
            SignificanceBand::from_p(0.5),
            SignificanceBand::NotSignificant
        );
        assert_eq!(
            SignificanceBand::from_p(0.05),
            SignificanceBand::NotSignificant
        );
        assert_eq!(SignificanceBand::from_p(0.03), SignificanceBand::P05);
        assert_eq!(SignificanceBand::from_p(0.001), SignificanceBand::P01);
    }

    #[test]
    fn length_checks() {
        let a = dist("a", &[1.0, 2.0, 3.0]);
        let b = dist("b", &[1.0, 2.0]);
        assert!(t_test(&a, &b, TTestVariant::Paired).is_err());
        assert!(t_test(&a, &b, TTestVariant::Welch).is_ok());
        assert!(t_test(&dist("c", &[1.0]), &a, TTestVariant::Welch).is_err());
    }

    fn samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..5.0, n),
                prop::collection::vec(0.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn p_symmetric_under_swap((a, b) in samples()) {
            for v in [TTestVariant::Paired, TTestVariant::Welch] {
                let ab = t_test(&dist("a", &a), &dist("b", &b), v);
                let ba = t_test(&dist("b", &b), &dist("a", &a), v);
                if let (Ok(ab), Ok(ba)) = (ab, ba) {
                    prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
                    prop_assert!((ab.t_statistic + ba.t_statistic).abs() < 1e-9);
                    prop_assert!((0.0..=1.0).contains(&ab.p_value));
                }
            }
        }

        #[test]
        fn paired_shift_invariant((a, b) in samples(), c in -10.0f64..10.0) {
            let r1 = t_test(&dist("a", &a), &dist("b", &b), TTestVariant::Paired);
            let a2: Vec<f64> = a.iter().map(|v| v + c).collect();
            let b2: Vec<f64> = b.iter().map(|v| v + c).collect();
            let r2 = t_test(&dist("a", &a2), &dist("b", &b2), TTestVariant::Paired);
            if let (Ok(r1), Ok(r2)) = (r1, r2) {
                prop_assert!((r1.t_statistic - r2.t_statistic).abs() <= 1e-6 * r1.t_statistic.abs().max(1.0));
            }
        }
    }
}
