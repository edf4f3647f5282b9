//! Per-paper false claim buckets and their insertion into review weaknesses.

use serde::{Deserialize, Serialize};

use crate::corpus::{PaperDocument, ReviewDocument};
use crate::llmgate::{Gateway, LlmRequest};
use crate::rng;
use crate::roles::prompts;

use super::{PerturbConfig, PerturbError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FalseClaim {
    pub claim: String,
    pub why_false: String,
    pub why_weakness: String,
}

/// Five misleading criticisms generated per paper, of which three are sampled
/// into each review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FalseClaimBucket {
    pub paper_id: String,
    pub claims: Vec<FalseClaim>,
}

pub const BUCKET_SIZE: usize = 5;
pub const CLAIMS_PER_REVIEW: usize = 3;

fn field_after<'a>(chunk: &'a str, label: &str, stops: &[&str]) -> Option<&'a str> {
    let lower = chunk.to_lowercase();
    let pos = lower.find(&label.to_lowercase())?;
    let start = pos + label.len();
    let mut end = chunk.len();
    for stop in stops {
        if let Some(p) = lower[start..].find(&stop.to_lowercase()) {
            end = end.min(start + p);
        }
    }
    Some(chunk[start..end].trim_start_matches([':', ' ']).trim())
}

/// Parse the rigid five-triple response template.
pub fn parse_bucket_response(text: &str) -> Result<Vec<FalseClaim>, String> {
    const CLAIM: &str = "False Claim";
    const FALSE: &str = "Why the claim is false";
    const WEAK: &str = "Why the claim is weakness";

    let lower = text.to_lowercase();
    let mut starts = Vec::new();
    let mut from = 0;
    while let Some(pos) = lower[from..].find(&CLAIM.to_lowercase()) {
        starts.push(from + pos);
        from += pos + CLAIM.len();
    }
    let mut claims = Vec::new();
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(text.len());
        let chunk = &text[start..end];
        let claim = field_after(chunk, CLAIM, &[FALSE, WEAK]).unwrap_or_default();
        let why_false = field_after(chunk, FALSE, &[WEAK]).unwrap_or_default();
        let why_weakness = field_after(chunk, WEAK, &[]).unwrap_or_default();
        if claim.is_empty() || why_false.is_empty() || why_weakness.is_empty() {
            return Err(format!("claim {} has an empty field", i + 1));
        }
        claims.push(FalseClaim {
            claim: claim.to_string(),
            why_false: why_false.to_string(),
            why_weakness: why_weakness.to_string(),
        });
    }
    if claims.len() != BUCKET_SIZE {
        return Err(format!(
            "expected {BUCKET_SIZE} claims, parsed {}",
            claims.len()
        ));
    }
    Ok(claims)
}

/// Generate a paper's false claim bucket via the gateway, retrying the whole
/// response up to `config.retries` times on parse failure. Returns the bucket
/// together with the number of gateway calls spent on it.
pub fn build_false_claim_bucket(
    paper: &PaperDocument,
    gateway: &Gateway,
    config: &PerturbConfig,
) -> Result<(FalseClaimBucket, u32), PerturbError> {
    let mut bindings = std::collections::BTreeMap::new();
    bindings.insert("Paper Content here".to_string(), paper.serialize_text());
    let prompt = prompts::render_prompt(prompts::PERTURB_REVIEW_FACTUAL, &bindings)?;

    let mut user_prompt = prompt;
    let mut last_error = String::new();
    let mut calls = 0u32;
    for attempt in 0..=config.retries {
        let request = LlmRequest {
            model_id: config.model_id.clone(),
            system_prompt: None,
            user_prompt: user_prompt.clone(),
            max_output_tokens: config.max_output_tokens,
            temperature: config.temperature,
            request_tag: format!("bucket/{}", paper.paper_id),
        };
        let response = gateway.complete(&request)?;
        calls += 1;
        match parse_bucket_response(&response.text) {
            Ok(claims) => {
                return Ok((
                    FalseClaimBucket {
                        paper_id: paper.paper_id.clone(),
                        claims,
                    },
                    calls,
                ))
            }
            Err(e) => {
                last_error = e;
                if attempt < config.retries {
                    user_prompt.push_str(
                        "\n\nReminder: output exactly 5 claims, each with the three labeled lines.",
                    );
                }
            }
        }
    }
    Err(PerturbError::BucketParseError { detail: last_error })
}

/// Append three seeded-sampled bucket claims to a review's weaknesses.
///
/// The inserted claims are distinct, chosen uniformly by the seed, and appear
/// as "- " bullets at the end of the weaknesses field; every other structured
/// field is byte-identical and the raw text changes only inside the
/// weaknesses region.
pub fn insert_false_claims(
    review: &ReviewDocument,
    bucket: &FalseClaimBucket,
    seed: u64,
) -> Result<(ReviewDocument, Vec<usize>), PerturbError> {
    if bucket.claims.len() < CLAIMS_PER_REVIEW {
        return Err(PerturbError::BucketTooSmall {
            have: bucket.claims.len(),
        });
    }
    let mut rng = rng::seeded_rng(seed, 0);
    let indices = rng::sample_indices(&mut rng, bucket.claims.len(), CLAIMS_PER_REVIEW);

    let mut weaknesses = review.weaknesses.clone();
    for &index in &indices {
        weaknesses.push_str("\n- ");
        weaknesses.push_str(&bucket.claims[index].claim);
    }
    let perturbed = ReviewDocument::from_fields(
        &review.review_id,
        &review.paper_id,
        &review.summary,
        &review.strengths,
        &weaknesses,
        review.contribution_score,
        review.soundness_score,
        review.presentation_score,
        review.overall_rating,
    );
    Ok((perturbed, indices))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bucket(n: usize) -> FalseClaimBucket {
        FalseClaimBucket {
            paper_id: "p1".to_string(),
            claims: (0..n)
                .map(|i| FalseClaim {
                    claim: format!("The authors used only {i} training samples."),
                    why_false: "The training set is fully described.".to_string(),
                    why_weakness: "Insufficient data would invalidate the results.".to_string(),
                })
                .collect(),
        }
    }

    fn review() -> ReviewDocument {
        ReviewDocument::from_fields(
            "r1",
            "p1",
            "Summary.",
            "Strengths.",
            "Original weakness.",
            3,
            3,
            2,
            6,
        )
    }

    fn triples(n: usize) -> String {
        (0..n)
            .map(|i| {
                format!(
                    "False Claim: Claim number {i}.\nWhy the claim is false: Because of evidence {i}.\nWhy the claim is weakness: It questions validity {i}.\n"
                )
            })
            .collect()
    }

    #[test]
    fn parses_five_triples() {
        let claims = parse_bucket_response(&triples(5)).unwrap();
        assert_eq!(claims.len(), 5);
        assert_eq!(claims[2].claim, "Claim number 2.");
        assert_eq!(claims[4].why_weakness, "It questions validity 4.");
    }

    #[test]
    fn four_triples_is_a_parse_error() {
        assert!(parse_bucket_response(&triples(4)).is_err());
        assert!(parse_bucket_response(&triples(6)).is_err());
    }

    #[test]
    fn empty_claim_field_is_a_parse_error() {
        let mut text = triples(4);
        text.push_str("False Claim:\nWhy the claim is false: x\nWhy the claim is weakness: y\n");
        assert!(parse_bucket_response(&text).is_err());
    }

    #[test]
    fn inserts_exactly_three_bucket_members() {
        let (perturbed, indices) = insert_false_claims(&review(), &bucket(5), 11).unwrap();
        assert_eq!(indices.len(), 3);
        let bullets: Vec<&str> = perturbed
            .weaknesses
            .lines()
            .filter(|l| l.starts_with("- "))
            .collect();
        assert_eq!(bullets.len(), 3);
        for bullet in &bullets {
            let text = &bullet[2..];
            assert!(bucket(5).claims.iter().any(|c| c.claim == text));
        }
        // Other fields byte-identical.
        let original = review();
        assert_eq!(perturbed.summary, original.summary);
        assert_eq!(perturbed.strengths, original.strengths);
        assert_eq!(perturbed.overall_rating, original.overall_rating);
        assert!(perturbed.weaknesses.starts_with(&original.weaknesses));
    }

    #[test]
    fn bucket_of_three_forces_all_claims() {
        for seed in [0, 1, 99] {
            let (_, indices) = insert_false_claims(&review(), &bucket(3), seed).unwrap();
            let mut sorted = indices.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2]);
        }
    }

    #[test]
    fn bucket_of_two_is_too_small() {
        let err = insert_false_claims(&review(), &bucket(2), 1).unwrap_err();
        assert!(matches!(err, PerturbError::BucketTooSmall { have: 2 }));
    }

    #[test]
    fn insertion_is_deterministic_in_seed() {
        let (a, ia) = insert_false_claims(&review(), &bucket(5), 42).unwrap();
        let (b, ib) = insert_false_claims(&review(), &bucket(5), 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(ia, ib);
        let (_, ic) = insert_false_claims(&review(), &bucket(5), 43).unwrap();
        assert!(ia == ic || a.weaknesses.len() == b.weaknesses.len());
    }
}
