//! Two one-sided tests (TOST) for paired equivalence.
//!
//! With mean difference d-bar, sample standard deviation sigma_d and
//! SE = sigma_d / sqrt(n), the two statistics are
//! t_lower = (d-bar + delta) / SE and t_upper = (d-bar - delta) / SE;
//! equivalence holds when t_lower > t(alpha, n-1) and t_upper < -t(alpha, n-1).
//! Zero-variance samples take the limit of those criteria: equivalent exactly
//! when |d-bar| < delta.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TostResult {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub standard_error: f64,
    pub margin: f64,
    // Degenerate (zero-variance) samples make the t statistics diverge; JSON
    // has no infinity, so non-finite values travel as strings.
    #[serde(with = "maybe_infinite")]
    pub t_lower: f64,
    #[serde(with = "maybe_infinite")]
    pub t_upper: f64,
    #[serde(with = "maybe_infinite")]
    pub critical_t: f64,
    pub equivalent: bool,
}

mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            serializer.serialize_f64(*value)
        } else if value.is_nan() {
            serializer.serialize_str("nan")
        } else if *value > 0.0 {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!(
                    "expected inf | -inf | nan, got {other:?}"
                ))),
            },
        }
    }
}

/// TOST over a difference vector. Unlike the Wilcoxon test, zero differences
/// are kept: they are evidence of equivalence.
pub fn tost_from_differences(
    differences: &[f64],
    margin: f64,
    alpha: f64,
) -> Result<TostResult, StatsError> {
    let n = differences.len();
    if n == 0 {
        return Err(StatsError::TooFewSamples { n });
    }
    let mean: f64 = differences.iter().sum::<f64>() / n as f64;
    if n == 1 {
        // No variance estimate. A single exactly-zero difference is still
        // equivalence in the degenerate sense; anything else is untestable.
        if mean == 0.0 {
            return Ok(degenerate_result(n, mean, margin));
        }
        return Err(StatsError::TooFewSamples { n });
    }

    let sum_sq: f64 = differences.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (sum_sq / (n as f64 - 1.0)).sqrt();
    if sd == 0.0 {
        return Ok(degenerate_result(n, mean, margin));
    }

    let se = sd / (n as f64).sqrt();
    let t_lower = (mean + margin) / se;
    let t_upper = (mean - margin) / se;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid t distribution");
    let critical_t = dist.inverse_cdf(1.0 - alpha);
    Ok(TostResult {
        n,
        mean_diff: mean,
        sd_diff: sd,
        standard_error: se,
        margin,
        t_lower,
        t_upper,
        critical_t,
        equivalent: t_lower > critical_t && t_upper < -critical_t,
    })
}

fn degenerate_result(n: usize, mean: f64, margin: f64) -> TostResult {
    // SE = 0: the t statistics diverge, so the criteria reduce to the margin
    // check. Signed infinities keep the t fields honest for reporting.
    let t_lower = if mean + margin > 0.0 {
        f64::INFINITY
    } else if mean + margin < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    let t_upper = if mean - margin > 0.0 {
        f64::INFINITY
    } else if mean - margin < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    TostResult {
        n,
        mean_diff: mean,
        sd_diff: 0.0,
        standard_error: 0.0,
        margin,
        t_lower,
        t_upper,
        critical_t: f64::INFINITY,
        equivalent: mean.abs() < margin,
    }
}
