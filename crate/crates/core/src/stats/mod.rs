//! Directional and invariance tests over paired baseline/perturbed runs.
//!
//! Everything here is pure and deterministic: pairs are sorted by bundle id
//! and reductions run left to right over that order, so no verdict depends on
//! scheduling.

mod agreement;
mod tost;
mod wilcoxon;

pub use agreement::{
    acceptance_rate_delta, cohen_kappa, decision_distribution_delta, transition_matrix,
};
pub use tost::{tost_from_differences, TostResult};
pub use wilcoxon::{wilcoxon_from_differences, WilcoxonMethod, WilcoxonResult};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roles::FinalDecision;

/// Exact enumeration is subsecond up to 2^20 sign vectors.
pub const DEFAULT_EXACT_THRESHOLD: usize = 20;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("baseline and perturbed runs share no bundles")]
    EmptyIntersection,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("unknown category {0}")]
    UnknownCategory(String),
    #[error("empty input")]
    EmptyInput,
    #[error("too few samples for a variance estimate (n = {n})")]
    TooFewSamples { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedObservation {
    pub bundle_id: String,
    pub baseline: f64,
    pub perturbed: f64,
}

/// Paired per-bundle metric values with materialized differences
/// d_i = baseline_i - perturbed_i, sorted by bundle id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSamples {
    pub metric: String,
    pub pairs: Vec<PairedObservation>,
    pub differences: Vec<f64>,
}

impl PairedSamples {
    pub fn from_pairs(metric: &str, mut pairs: Vec<PairedObservation>) -> PairedSamples {
        pairs.sort_by(|a, b| a.bundle_id.cmp(&b.bundle_id));
        debug_assert!(
            pairs.windows(2).all(|w| w[0].bundle_id != w[1].bundle_id),
            "duplicate bundle id in paired samples"
        );
        let differences = pairs.iter().map(|p| p.baseline - p.perturbed).collect();
        PairedSamples {
            metric: metric.to_string(),
            pairs,
            differences,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Differences oriented as (perturbed - baseline), the reporting direction.
    pub fn deltas(&self) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|p| p.perturbed - p.baseline)
            .collect()
    }
}

/// Inner-join two runs on bundle id. Bundles present in only one arm are
/// excluded and reported back for accounting.
pub fn pair_runs(
    metric: &str,
    baseline: &BTreeMap<String, f64>,
    perturbed: &BTreeMap<String, f64>,
) -> Result<(PairedSamples, Vec<String>), StatsError> {
    let mut pairs = Vec::new();
    let mut excluded = Vec::new();
    for (bundle_id, &base) in baseline {
        match perturbed.get(bundle_id) {
            Some(&pert) => pairs.push(PairedObservation {
                bundle_id: bundle_id.clone(),
                baseline: base,
                perturbed: pert,
            }),
            None => excluded.push(bundle_id.clone()),
        }
    }
    for bundle_id in perturbed.keys() {
        if !baseline.contains_key(bundle_id) {
            excluded.push(bundle_id.clone());
        }
    }
    excluded.sort();
    if pairs.is_empty() {
        return Err(StatsError::EmptyIntersection);
    }
    Ok((PairedSamples::from_pairs(metric, pairs), excluded))
}

/// Wilcoxon over the materialized differences (baseline - perturbed).
pub fn wilcoxon_signed_rank(samples: &PairedSamples, exact_threshold: usize) -> WilcoxonResult {
    wilcoxon_from_differences(&samples.differences, exact_threshold)
}

/// TOST over the materialized differences (baseline - perturbed).
pub fn tost_equivalence(
    samples: &PairedSamples,
    margin: f64,
    alpha: f64,
) -> Result<TostResult, StatsError> {
    tost_from_differences(&samples.differences, margin, alpha)
}

/// Arithmetic mean of (perturbed - baseline).
pub fn mean_delta(samples: &PairedSamples) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    Ok(samples.deltas().iter().sum::<f64>() / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictValue {
    Increase,
    Decrease,
    Invariance,
    Inconclusive,
}

impl VerdictValue {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictValue::Increase => "increase",
            VerdictValue::Decrease => "decrease",
            VerdictValue::Invariance => "invariance",
            VerdictValue::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for VerdictValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of the directional + invariance test pair for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub value: VerdictValue,
    /// Wilcoxon on (perturbed - baseline), so increase means p_greater < alpha.
    pub wilcoxon: WilcoxonResult,
    /// Present only when the Wilcoxon test found no significant difference.
    pub tost: Option<TostResult>,
    pub alpha: f64,
}

/// Directional test first, invariance test second.
///
/// Wilcoxon runs on (perturbed - baseline): a significant right tail is an
/// increase, a significant left tail a decrease. Otherwise TOST decides
/// between invariance and an inconclusive cell; samples too small for a
/// variance estimate cannot establish equivalence and land in inconclusive.
pub fn classify_outcome(samples: &PairedSamples, margin: f64, alpha: f64) -> TestVerdict {
    let deltas = samples.deltas();
    let wilcoxon = wilcoxon_from_differences(&deltas, DEFAULT_EXACT_THRESHOLD);
    if wilcoxon.p_greater < alpha {
        return TestVerdict {
            value: VerdictValue::Increase,
            wilcoxon,
            tost: None,
            alpha,
        };
    }
    if wilcoxon.p_less < alpha {
        return TestVerdict {
            value: VerdictValue::Decrease,
            wilcoxon,
            tost: None,
            alpha,
        };
    }
    match tost_from_differences(&deltas, margin, alpha) {
        Ok(tost) => {
            let value = if tost.equivalent {
                VerdictValue::Invariance
            } else {
                VerdictValue::Inconclusive
            };
            TestVerdict {
                value,
                wilcoxon,
                tost: Some(tost),
                alpha,
            }
        }
        Err(_) => TestVerdict {
            value: VerdictValue::Inconclusive,
            wilcoxon,
            tost: None,
            alpha,
        },
    }
}

// ---------------------------------------------------------------------------
// Decision mappings
// ---------------------------------------------------------------------------

/// Fallback prestige-scarcity weights, from conference-wide acceptance shares
/// (80% poster, 16% spotlight, 4% oral): spotlight 0.80/0.16, oral 0.80/0.04.
pub const DEFAULT_SPOTLIGHT_WEIGHT: f64 = 4.0;
pub const DEFAULT_ORAL_WEIGHT: f64 = 19.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum DecisionMapping {
    /// Ordinal: reject 0, poster 1, spotlight 2, oral 3.
    Simple,
    /// Reject 0, poster 1, spotlight 1 + spotlight_weight, oral 1 + oral_weight.
    Proportional {
        spotlight_weight: f64,
        oral_weight: f64,
    },
}

impl DecisionMapping {
    pub fn proportional_default() -> DecisionMapping {
        DecisionMapping::Proportional {
            spotlight_weight: DEFAULT_SPOTLIGHT_WEIGHT,
            oral_weight: DEFAULT_ORAL_WEIGHT,
        }
    }

    /// Proportional weights from inverse category frequency in a baseline
    /// run's decisions, normalized so poster maps to 1. Categories absent
    /// from the baseline fall back to the documented defaults.
    pub fn proportional_from_baseline(decisions: &[FinalDecision]) -> DecisionMapping {
        let count = |d: FinalDecision| decisions.iter().filter(|&&x| x == d).count() as f64;
        let posters = count(FinalDecision::AcceptPoster);
        let spotlights = count(FinalDecision::AcceptSpotlight);
        let orals = count(FinalDecision::AcceptOral);
        let spotlight_weight = if posters > 0.0 && spotlights > 0.0 {
            posters / spotlights - 1.0
        } else {
            DEFAULT_SPOTLIGHT_WEIGHT
        };
        let oral_weight = if posters > 0.0 && orals > 0.0 {
            posters / orals - 1.0
        } else {
            DEFAULT_ORAL_WEIGHT
        };
        DecisionMapping::Proportional {
            spotlight_weight,
            oral_weight,
        }
    }
}

/// Numeric value of a final decision under the chosen mapping scheme.
pub fn map_decision(decision: FinalDecision, scheme: &DecisionMapping) -> f64 {
    match scheme {
        DecisionMapping::Simple => match decision {
            FinalDecision::Reject => 0.0,
            FinalDecision::AcceptPoster => 1.0,
            FinalDecision::AcceptSpotlight => 2.0,
            FinalDecision::AcceptOral => 3.0,
        },
        DecisionMapping::Proportional {
            spotlight_weight,
            oral_weight,
        } => match decision {
            FinalDecision::Reject => 0.0,
            FinalDecision::AcceptPoster => 1.0,
            FinalDecision::AcceptSpotlight => 1.0 + spotlight_weight,
            FinalDecision::AcceptOral => 1.0 + oral_weight,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roles::FinalDecision::*;

    fn map_of(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn pair_runs_inner_joins_and_reports_exclusions() {
        let baseline = map_of(&[("A", 8.0), ("B", 6.0)]);
        let perturbed = map_of(&[("A", 7.0), ("B", 6.0), ("C", 5.0)]);
        let (samples, excluded) = pair_runs("overall", &baseline, &perturbed).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(excluded, vec!["C".to_string()]);
        assert_eq!(samples.differences, vec![1.0, 0.0]);
    }

    #[test]
    fn pair_runs_rejects_disjoint_sets() {
        let baseline = map_of(&[("A", 8.0)]);
        let perturbed = map_of(&[("B", 7.0)]);
        let err = pair_runs("overall", &baseline, &perturbed).unwrap_err();
        assert!(matches!(err, StatsError::EmptyIntersection));
    }

    #[test]
    fn mean_delta_is_perturbed_minus_baseline() {
        let samples = PairedSamples::from_pairs(
            "overall",
            vec![
                PairedObservation {
                    bundle_id: "a".to_string(),
                    baseline: 8.0,
                    perturbed: 7.0,
                },
                PairedObservation {
                    bundle_id: "b".to_string(),
                    baseline: 6.0,
                    perturbed: 6.0,
                },
            ],
        );
        assert_eq!(mean_delta(&samples).unwrap(), -0.5);
    }

    fn samples_from(pairs: &[(f64, f64)]) -> PairedSamples {
        PairedSamples::from_pairs(
            "m",
            pairs
                .iter()
                .enumerate()
                .map(|(i, (b, p))| PairedObservation {
                    bundle_id: format!("b{i:02}"),
                    baseline: *b,
                    perturbed: *p,
                })
                .collect(),
        )
    }

    #[test]
    fn strong_downward_shift_is_decrease() {
        let pairs: Vec<(f64, f64)> = (0..20).map(|i| (6.0 + (i % 3) as f64, 4.0)).collect();
        let verdict = classify_outcome(&samples_from(&pairs), 1.0, 0.05);
        assert_eq!(verdict.value, VerdictValue::Decrease);
        assert!(verdict.tost.is_none());
    }

    #[test]
    fn strong_upward_shift_is_increase() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|_| (5.0, 7.0)).collect();
        let verdict = classify_outcome(&samples_from(&pairs), 1.0, 0.05);
        assert_eq!(verdict.value, VerdictValue::Increase);
    }

    #[test]
    fn identity_run_is_invariance() {
        let pairs: Vec<(f64, f64)> = (0..8)
            .map(|i| (6.0 + i as f64 % 2.0, 6.0 + i as f64 % 2.0))
            .collect();
        let verdict = classify_outcome(&samples_from(&pairs), 0.5, 0.05);
        assert_eq!(verdict.value, VerdictValue::Invariance);
        assert_eq!(verdict.wilcoxon.n_nonzero, 0);
        assert!(verdict.tost.unwrap().equivalent);
    }

    #[test]
    fn noisy_small_sample_is_inconclusive() {
        let pairs = [
            (6.0, 8.0),
            (6.0, 4.0),
            (6.0, 8.5),
            (6.0, 3.5),
            (6.0, 8.2),
            (6.0, 3.8),
        ];
        let verdict = classify_outcome(&samples_from(&pairs), 1.0, 0.05);
        assert_eq!(verdict.value, VerdictValue::Inconclusive);
        assert!(!verdict.tost.unwrap().equivalent);
    }

    #[test]
    fn simple_mapping_is_the_ordinal_table() {
        assert_eq!(map_decision(Reject, &DecisionMapping::Simple), 0.0);
        assert_eq!(map_decision(AcceptPoster, &DecisionMapping::Simple), 1.0);
        assert_eq!(map_decision(AcceptSpotlight, &DecisionMapping::Simple), 2.0);
        assert_eq!(map_decision(AcceptOral, &DecisionMapping::Simple), 3.0);
    }

    #[test]
    fn proportional_mapping_keeps_poster_at_one() {
        let scheme = DecisionMapping::proportional_default();
        assert_eq!(map_decision(AcceptPoster, &scheme), 1.0);
        assert_eq!(map_decision(AcceptSpotlight, &scheme), 5.0);
        assert_eq!(map_decision(AcceptOral, &scheme), 20.0);
        assert_eq!(map_decision(Reject, &scheme), 0.0);
    }

    #[test]
    fn decisions_pair_as_numbers_via_the_mapping() {
        let baseline = [AcceptPoster, AcceptSpotlight, Reject];
        let perturbed = [Reject, AcceptSpotlight, AcceptOral];
        let to_map = |values: &[crate::roles::FinalDecision]| -> BTreeMap<String, f64> {
            values
                .iter()
                .enumerate()
                .map(|(i, d)| (format!("b{i}"), map_decision(*d, &DecisionMapping::Simple)))
                .collect()
        };
        let (samples, excluded) =
            pair_runs("final_decision", &to_map(&baseline), &to_map(&perturbed)).unwrap();
        assert!(excluded.is_empty());
        // d_i = baseline - perturbed over the ordinal values.
        assert_eq!(samples.differences, vec![1.0, 0.0, -3.0]);
        assert_eq!(samples.deltas(), vec![-1.0, 0.0, 3.0]);
    }

    #[test]
    fn proportional_weights_follow_baseline_frequencies() {
        // 8 posters, 2 spotlights, 0 orals: w_s = 8/2 - 1 = 3, oral falls back.
        let mut decisions = vec![AcceptPoster; 8];
        decisions.extend([AcceptSpotlight, AcceptSpotlight]);
        let scheme = DecisionMapping::proportional_from_baseline(&decisions);
        match scheme {
            DecisionMapping::Proportional {
                spotlight_weight,
                oral_weight,
            } => {
                assert_eq!(spotlight_weight, 3.0);
                assert_eq!(oral_weight, DEFAULT_ORAL_WEIGHT);
            }
            other => panic!("unexpected scheme {other:?}"),
        }
    }
}
