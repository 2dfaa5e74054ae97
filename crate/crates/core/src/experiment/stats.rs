//! Repetition statistics: mean and two-sided 95% confidence intervals using
//! Student's t with n-1 degrees of freedom.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean with an optional 95% CI half-width; the CI is flagged unavailable
/// (None) below two repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci95_half_width: Option<f64>,
}

/// Two-sided 97.5% Student's t quantile for the given degrees of freedom.
pub fn t_quantile_975(df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("valid t distribution")
        .inverse_cdf(0.975)
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len();
    assert!(n > 0, "aggregate of empty sample");
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Aggregate {
            n,
            mean,
            ci95_half_width: None,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let half_width = t_quantile_975((n - 1) as f64) * sd / (n as f64).sqrt();
    Aggregate {
        n,
        mean,
        ci95_half_width: Some(half_width),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form two-sided 97.5% t quantiles (standard table values).
    const T_TABLE: &[(f64, f64)] = &[
        (1.0, 12.706204736174696),
        (2.0, 4.302652729749464),
        (3.0, 3.1824463052842625),
        (4.0, 2.7764451051977987),
        (9.0, 2.2621571627409915),
        (29.0, 2.045229642132703),
    ];

    #[test]
    fn t_quantiles_match_closed_form() {
        for &(df, expected) in T_TABLE {
            let got = t_quantile_975(df);
            assert!(
                (got - expected).abs() / expected < 1e-9,
                "df={df}: got {got}, want {expected}"
            );
        }
    }

    #[test]
    fn three_run_interval() {
        let a = aggregate(&[92.0, 93.0, 94.0]);
        assert_eq!(a.mean, 93.0);
        let hw = a.ci95_half_width.unwrap();
        // t(0.975, 2) * 1 / sqrt(3)
        assert!((hw - 2.4841).abs() < 0.01, "{hw}");
    }

    #[test]
    fn identical_repetitions_zero_width() {
        let a = aggregate(&[5.0, 5.0, 5.0, 5.0]);
        assert_eq!(a.mean, 5.0);
        assert_eq!(a.ci95_half_width, Some(0.0));
    }

    #[test]
    fn single_run_flagged_unavailable() {
        let a = aggregate(&[42.0]);
        assert_eq!(a.mean, 42.0);
        assert_eq!(a.ci95_half_width, None);
    }

    #[test]
    fn known_variance_matches_closed_form_to_1e9() {
        // synthetic data with exactly computable sd
        let values: Vec<f64> = (0..10).map(|i| 10.0 + i as f64).collect();
        let a = aggregate(&values);
        let mean = 14.5;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0).sqrt();
        let expected = 2.2621571627409915 * sd / 10f64.sqrt();
        let got = a.ci95_half_width.unwrap();
        assert!((got - expected).abs() / expected < 1e-9);
    }
}
