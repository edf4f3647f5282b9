//! Wilcoxon signed-rank test with one-sided p-values.
//!
//! Zero differences are discarded; tied absolute differences receive average
//! ranks. For small N the p-values come from exact enumeration of the sign
//! distribution over the observed rank multiset (computed by subset-sum
//! counting, which is equivalent to walking all 2^N sign vectors); above the
//! threshold the usual normal approximation applies, with no continuity
//! correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Number of nonzero differences.
    pub n_nonzero: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub method: WilcoxonMethod,
    pub z: Option<f64>,
    /// P(W+ >= observed) under the null.
    pub p_greater: f64,
    /// P(W+ <= observed) under the null.
    pub p_less: f64,
}

/// Average ranks of |d| over the nonzero differences, in input order.
fn average_ranks(magnitudes: &[f64]) -> Vec<f64> {
    let n = magnitudes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| magnitudes[a].partial_cmp(&magnitudes[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && magnitudes[order[j + 1]] == magnitudes[order[i]] {
            j += 1;
        }
        // Positions i..=j (1-based i+1..=j+1) share the average rank.
        let average = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = average;
        }
        i = j + 1;
    }
    ranks
}

/// Exact one-sided tail probabilities of W+ for the given rank multiset.
///
/// Ranks are multiples of 1/2, so doubling them yields integers and the
/// distribution of 2*W+ is a subset-sum count over those integers. Counts are
/// exact (they total 2^N), so the returned probabilities are the exact
/// rationals rounded once to f64.
fn exact_tail_probabilities(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let observed = (w_plus * 2.0).round() as usize;
    let denom = (1u64 << ranks.len()) as f64;
    let greater: u64 = counts[observed..].iter().sum();
    let less: u64 = counts[..=observed].iter().sum();
    (greater as f64 / denom, less as f64 / denom)
}

fn normal_upper_tail(z: f64) -> f64 {
    // P(Z >= z) via erfc so that negating z swaps the two tails bit-exactly.
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Wilcoxon signed-rank over a difference vector.
pub fn wilcoxon_from_differences(differences: &[f64], exact_threshold: usize) -> WilcoxonResult {
    let nonzero: Vec<f64> = differences.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return WilcoxonResult {
            n_nonzero: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            method: WilcoxonMethod::Exact,
            z: None,
            p_greater: 1.0,
            p_less: 1.0,
        };
    }

    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    for (d, r) in nonzero.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }

    if n <= exact_threshold {
        let (p_greater, p_less) = exact_tail_probabilities(&ranks, w_plus);
        WilcoxonResult {
            n_nonzero: n,
            w_plus,
            w_minus,
            method: WilcoxonMethod::Exact,
            z: None,
            p_greater,
            p_less,
        }
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
        let z = (w_plus - mean) / sd;
        WilcoxonResult {
            n_nonzero: n,
            w_plus,
            w_minus,
            method: WilcoxonMethod::Normal,
            z: Some(z),
            p_greater: normal_upper_tail(z),
            p_less: normal_upper_tail(-z),
        }
    }
}
