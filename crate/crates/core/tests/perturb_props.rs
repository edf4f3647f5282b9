//! Property tests for span edits and the rule-based operators.

use proptest::prelude::*;

use review_perturb::corpus::ReviewDocument;
use review_perturb::perturb::{
    apply_replacement, insert_false_claims, locate_span, rewrite_rating_tokens, ConclusionRewrites,
    FalseClaim, FalseClaimBucket,
};

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,6}".prop_map(|w| w)
}

fn document() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 4..60)
}

proptest! {
    // Anchors cut from the document itself: location must succeed and the
    // replacement must touch nothing outside the span.
    #[test]
    fn span_edits_are_local(
        words in document(),
        start_index in 0usize..50,
        span_words in 1usize..8,
        anchor_words in 1usize..3,
        replacement in "[a-zA-Z ]{0,30}",
    ) {
        let start_index = start_index % words.len();
        let span_words = span_words.min(words.len() - start_index);
        let doc = words.join(" ");
        let span: Vec<&str> = words[start_index..start_index + span_words]
            .iter()
            .map(String::as_str)
            .collect();
        let start_anchor = span[..anchor_words.min(span.len())].join(" ");
        let end_anchor = span[span.len() - anchor_words.min(span.len())..].join(" ");

        match apply_replacement(&doc, &start_anchor, &end_anchor, &replacement) {
            Ok((out, range)) => {
                prop_assert_eq!(&out[..range.start], &doc[..range.start]);
                prop_assert_eq!(
                    &out[range.start + replacement.len()..],
                    &doc[range.end..]
                );
                prop_assert_eq!(&out[range.start..range.start + replacement.len()], replacement.as_str());
            }
            // Repeated words can make the start anchor ambiguous; that must
            // be reported, never silently misapplied.
            Err(e) => {
                let msg = e.to_string();
                prop_assert!(msg.contains("ambiguous") || msg.contains("more than 3") || msg.contains("not found"), "{}", msg);
            }
        }
    }

    #[test]
    fn missing_anchors_change_nothing(words in document(), replacement in "[a-z ]{0,20}") {
        let doc = words.join(" ");
        // "0" can never appear in a lowercase-alpha document.
        let result = apply_replacement(&doc, "0missing0", "0words0", &replacement);
        prop_assert!(result.is_err());
        prop_assert!(locate_span(&doc, "0missing0", "0words0").is_err());
    }

    #[test]
    fn claim_insertion_is_exact_and_seeded(seed in any::<u64>(), bucket_size in 3usize..8) {
        let bucket = FalseClaimBucket {
            paper_id: "p".to_string(),
            claims: (0..bucket_size)
                .map(|i| FalseClaim {
                    claim: format!("False statement number {i}."),
                    why_false: "evidence".to_string(),
                    why_weakness: "weakens".to_string(),
                })
                .collect(),
        };
        let review = ReviewDocument::from_fields(
            "r1", "p", "Summary.", "Strengths.", "A weakness.", 3, 3, 2, 6,
        );
        let (perturbed, indices) = insert_false_claims(&review, &bucket, seed).unwrap();
        prop_assert_eq!(indices.len(), 3);
        let mut unique = indices.clone();
        unique.sort_unstable();
        unique.dedup();
        prop_assert_eq!(unique.len(), 3);
        for &index in &indices {
            prop_assert!(perturbed.weaknesses.contains(&bucket.claims[index].claim));
        }
        prop_assert_eq!(&perturbed.summary, &review.summary);
        prop_assert_eq!(&perturbed.strengths, &review.strengths);
        prop_assert_eq!(perturbed.overall_rating, review.overall_rating);
        prop_assert!(perturbed.weaknesses.starts_with(&review.weaknesses));

        let (again, indices_again) = insert_false_claims(&review, &bucket, seed).unwrap();
        prop_assert_eq!(perturbed, again);
        prop_assert_eq!(indices, indices_again);
    }

    #[test]
    fn conclusion_rewrite_is_idempotent(rating in 1i32..=10, filler in "[a-z ]{0,40}") {
        let table = ConclusionRewrites::default_table();
        let text = format!("{filler} Rating: {rating}. I would accept this; weak accept overall.");
        let (once, _) = rewrite_rating_tokens(&text, &table);
        let (twice, rewrites) = rewrite_rating_tokens(&once, &table);
        prop_assert_eq!(once, twice);
        prop_assert!(rewrites.is_empty());
    }
}
