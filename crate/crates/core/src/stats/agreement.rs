//! Agreement and transition summaries over categorical decisions.

use std::collections::BTreeMap;

use crate::roles::FinalDecision;

use super::StatsError;

/// Cohen's kappa between two equal-length label vectors.
///
/// kappa = (p_o - p_e) / (1 - p_e); when chance agreement is total
/// (p_e = 1) the statistic is defined as 1 for perfect agreement, 0 otherwise.
pub fn cohen_kappa<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;

    let mut counts_a: BTreeMap<&T, usize> = BTreeMap::new();
    let mut counts_b: BTreeMap<&T, usize> = BTreeMap::new();
    for x in a {
        *counts_a.entry(x).or_default() += 1;
    }
    for y in b {
        *counts_b.entry(y).or_default() += 1;
    }
    let chance: f64 = counts_a
        .iter()
        .map(|(label, &ca)| {
            let cb = counts_b.get(label).copied().unwrap_or(0);
            (ca as f64 / n) * (cb as f64 / n)
        })
        .sum();

    if chance >= 1.0 {
        return Ok(if observed >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((observed - chance) / (1.0 - chance))
}

/// Counts matrix M[i][j] = #{k : before_k = order[i] and after_k = order[j]}.
pub fn transition_matrix<T: Eq + Clone + std::fmt::Debug>(
    before: &[T],
    after: &[T],
    order: &[T],
) -> Result<Vec<Vec<u64>>, StatsError> {
    if before.len() != after.len() {
        return Err(StatsError::LengthMismatch {
            left: before.len(),
            right: after.len(),
        });
    }
    let index_of = |value: &T| -> Result<usize, StatsError> {
        order
            .iter()
            .position(|o| o == value)
            .ok_or_else(|| StatsError::UnknownCategory(format!("{value:?}")))
    };
    let mut matrix = vec![vec![0u64; order.len()]; order.len()];
    for (b, a) in before.iter().zip(after) {
        matrix[index_of(b)?][index_of(a)?] += 1;
    }
    Ok(matrix)
}

/// Acceptance-rate change in percentage points: 100 * (acc(after) - acc(before)).
pub fn acceptance_rate_delta(
    before: &[FinalDecision],
    after: &[FinalDecision],
) -> Result<f64, StatsError> {
    if before.is_empty() || after.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if before.len() != after.len() {
        return Err(StatsError::LengthMismatch {
            left: before.len(),
            right: after.len(),
        });
    }
    let rate = |decisions: &[FinalDecision]| {
        decisions.iter().filter(|d| d.is_accept()).count() as f64 / decisions.len() as f64
    };
    Ok(100.0 * (rate(after) - rate(before)))
}

/// Per-category share change in percentage points, in `order` order.
pub fn decision_distribution_delta(
    before: &[FinalDecision],
    after: &[FinalDecision],
    order: &[FinalDecision],
) -> Result<Vec<f64>, StatsError> {
    if before.is_empty() || after.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if before.len() != after.len() {
        return Err(StatsError::LengthMismatch {
            left: before.len(),
            right: after.len(),
        });
    }
    let share = |decisions: &[FinalDecision], category: &FinalDecision| {
        decisions.iter().filter(|d| *d == category).count() as f64 / decisions.len() as f64
    };
    Ok(order
        .iter()
        .map(|category| 100.0 * (share(after, category) - share(before, category)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roles::FinalDecision::*;

    #[test]
    fn kappa_of_identical_vectors_is_one() {
        let a = vec!["x", "y", "x", "z"];
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn kappa_at_chance_is_zero() {
        // p_o = 0.5 and p_e = 0.5.
        let a = vec!["A", "A", "B", "B"];
        let b = vec!["A", "B", "A", "B"];
        assert_eq!(cohen_kappa(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn kappa_handles_total_chance_agreement() {
        let a = vec!["A", "A"];
        let b = vec!["A", "A"];
        assert_eq!(cohen_kappa(&a, &b).unwrap(), 1.0);
        let c = vec!["A", "A"];
        let d = vec!["B", "B"];
        // p_e over shared labels is 0 here; use same-label marginals instead.
        assert!(cohen_kappa(&c, &d).unwrap() <= 0.0);
    }

    #[test]
    fn kappa_rejects_length_mismatch() {
        let err = cohen_kappa(&["A"], &["A", "B"]).unwrap_err();
        assert!(matches!(err, StatsError::LengthMismatch { .. }));
    }

    #[test]
    fn identity_transition_is_diagonal() {
        let order = [Reject, AcceptPoster, AcceptSpotlight, AcceptOral];
        let decisions = vec![AcceptPoster, Reject, AcceptPoster, AcceptOral];
        let matrix = transition_matrix(&decisions, &decisions, &order).unwrap();
        for (i, row) in matrix.iter().enumerate() {
            for (j, &count) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(count, 0);
                }
            }
        }
        let total: u64 = matrix.iter().flatten().sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn transitions_are_hand_countable() {
        let order = [Reject, AcceptPoster, AcceptSpotlight, AcceptOral];
        let before = vec![AcceptPoster, AcceptPoster];
        let after = vec![Reject, AcceptPoster];
        let matrix = transition_matrix(&before, &after, &order).unwrap();
        assert_eq!(matrix[1][0], 1);
        assert_eq!(matrix[1][1], 1);
    }

    #[test]
    fn unknown_category_is_rejected() {
        let order = [Reject, AcceptPoster];
        let err = transition_matrix(&[AcceptOral], &[Reject], &order).unwrap_err();
        assert!(matches!(err, StatsError::UnknownCategory(_)));
    }

    #[test]
    fn acceptance_delta_examples() {
        let same = vec![AcceptPoster, Reject, AcceptOral];
        assert_eq!(acceptance_rate_delta(&same, &same).unwrap(), 0.0);
        let before = vec![AcceptPoster, AcceptPoster, AcceptSpotlight, Reject];
        let after = vec![AcceptPoster, Reject, AcceptSpotlight, Reject];
        assert_eq!(acceptance_rate_delta(&before, &after).unwrap(), -25.0);
        assert!(matches!(
            acceptance_rate_delta(&[], &[]).unwrap_err(),
            StatsError::EmptyInput
        ));
    }

    #[test]
    fn distribution_delta_sums_to_zero() {
        let order = [Reject, AcceptPoster, AcceptSpotlight, AcceptOral];
        let before = vec![AcceptPoster, AcceptPoster, AcceptSpotlight, AcceptOral];
        let after = vec![Reject, AcceptPoster, AcceptSpotlight, AcceptSpotlight];
        let deltas = decision_distribution_delta(&before, &after, &order).unwrap();
        assert!((deltas.iter().sum::<f64>()).abs() < 1e-9);
        assert_eq!(deltas[0], 25.0);
    }
}
