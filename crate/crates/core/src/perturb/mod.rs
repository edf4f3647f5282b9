//! The nine perturbation operators.
//!
//! Seven aspects drive an LLM with span-edit prompts; review factual
//! correctness and review conclusion are rule-based. Every operator touches
//! exactly one bundle component (paper, reviews, or rebuttals) and leaves the
//! other two byte-identical, and every applied or failed edit is logged.

mod accounting;
mod claims;
mod conclusion;
mod edits;
mod span;

pub use accounting::{
    sample_for_manual_eval, summarize_perturbations, AspectStats, EvalManifest, EvalRow,
};
pub use claims::{
    build_false_claim_bucket, insert_false_claims, parse_bucket_response, FalseClaim,
    FalseClaimBucket, BUCKET_SIZE, CLAIMS_PER_REVIEW,
};
pub use conclusion::{flip_conclusion, rewrite_rating_tokens, ConclusionRewrites, TokenRewrite};
pub use edits::{apply_parsed_edits, parse_edit_blocks, ParsedEdit};
pub use span::{apply_replacement, locate_span, SpanError};

/// Apply one edit record's anchored replacement to a document. Fails without
/// touching the input when the anchors do not locate.
pub fn apply_edit(doc_text: &str, edit: &EditRecord) -> Result<String, SpanError> {
    apply_replacement(
        doc_text,
        &edit.start_anchor,
        &edit.end_anchor,
        &edit.replacement,
    )
    .map(|(text, _)| text)
}

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Bundle;
use crate::llmgate::{Gateway, GatewayError, LlmRequest};
use crate::rng;
use crate::roles::{prompts, RoleError};
use crate::taxonomy::{self, PaperAspect, TaxonomyRules};

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("aspect {aspect} is not {expected}")]
    InvalidAspect {
        aspect: PerturbationAspect,
        expected: &'static str,
    },
    #[error("no edit was applied for bundle {bundle_id}")]
    AllEditsFailed {
        bundle_id: String,
        log: Box<PerturbationLog>,
    },
    #[error("false claim bucket parse failed: {detail}")]
    BucketParseError { detail: String },
    #[error("false claim bucket holds {have} claims, need {}", CLAIMS_PER_REVIEW)]
    BucketTooSmall { have: usize },
    #[error("insufficient samples for {what}: need {need}, have {have}")]
    InsufficientSamples {
        what: String,
        need: usize,
        have: usize,
    },
    #[error(transparent)]
    Taxonomy(#[from] taxonomy::TaxonomyError),
    #[error(transparent)]
    Role(#[from] RoleError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Paper,
    Review,
    Rebuttal,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Paper => "paper",
            Mode::Review => "review",
            Mode::Rebuttal => "rebuttal",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the nine (mode, aspect) taxonomy entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PerturbationAspect {
    PaperContribution,
    PaperSoundness,
    PaperPresentation,
    ReviewTone,
    ReviewFactual,
    ReviewConclusion,
    RebuttalTone,
    RebuttalPresentation,
    RebuttalCompleteness,
}

impl PerturbationAspect {
    pub const ALL: [PerturbationAspect; 9] = [
        PerturbationAspect::PaperContribution,
        PerturbationAspect::PaperSoundness,
        PerturbationAspect::PaperPresentation,
        PerturbationAspect::ReviewTone,
        PerturbationAspect::ReviewFactual,
        PerturbationAspect::ReviewConclusion,
        PerturbationAspect::RebuttalTone,
        PerturbationAspect::RebuttalPresentation,
        PerturbationAspect::RebuttalCompleteness,
    ];

    /// The seven aspects realized through LLM edit prompts.
    pub const LLM_EDIT_ASPECTS: [PerturbationAspect; 7] = [
        PerturbationAspect::PaperContribution,
        PerturbationAspect::PaperSoundness,
        PerturbationAspect::PaperPresentation,
        PerturbationAspect::ReviewTone,
        PerturbationAspect::RebuttalTone,
        PerturbationAspect::RebuttalPresentation,
        PerturbationAspect::RebuttalCompleteness,
    ];

    pub fn mode(self) -> Mode {
        match self {
            PerturbationAspect::PaperContribution
            | PerturbationAspect::PaperSoundness
            | PerturbationAspect::PaperPresentation => Mode::Paper,
            PerturbationAspect::ReviewTone
            | PerturbationAspect::ReviewFactual
            | PerturbationAspect::ReviewConclusion => Mode::Review,
            PerturbationAspect::RebuttalTone
            | PerturbationAspect::RebuttalPresentation
            | PerturbationAspect::RebuttalCompleteness => Mode::Rebuttal,
        }
    }

    pub fn aspect_name(self) -> &'static str {
        match self {
            PerturbationAspect::PaperContribution => "contribution",
            PerturbationAspect::PaperSoundness => "soundness",
            PerturbationAspect::PaperPresentation | PerturbationAspect::RebuttalPresentation => {
                "presentation"
            }
            PerturbationAspect::ReviewTone | PerturbationAspect::RebuttalTone => "tone",
            PerturbationAspect::ReviewFactual => "factual",
            PerturbationAspect::ReviewConclusion => "conclusion",
            PerturbationAspect::RebuttalCompleteness => "completeness",
        }
    }

    pub fn is_llm_edit(self) -> bool {
        Self::LLM_EDIT_ASPECTS.contains(&self)
    }

    pub fn paper_aspect(self) -> Option<PaperAspect> {
        match self {
            PerturbationAspect::PaperContribution => Some(PaperAspect::Contribution),
            PerturbationAspect::PaperSoundness => Some(PaperAspect::Soundness),
            PerturbationAspect::PaperPresentation => Some(PaperAspect::Presentation),
            _ => None,
        }
    }

    fn template_id(self) -> Option<&'static str> {
        match self {
            PerturbationAspect::PaperContribution => Some(prompts::PERTURB_PAPER_CONTRIBUTION),
            PerturbationAspect::PaperSoundness => Some(prompts::PERTURB_PAPER_SOUNDNESS),
            PerturbationAspect::PaperPresentation => Some(prompts::PERTURB_PAPER_PRESENTATION),
            PerturbationAspect::ReviewTone => Some(prompts::PERTURB_REVIEW_TONE),
            PerturbationAspect::RebuttalTone => Some(prompts::PERTURB_REBUTTAL_TONE),
            PerturbationAspect::RebuttalPresentation => {
                Some(prompts::PERTURB_REBUTTAL_PRESENTATION)
            }
            PerturbationAspect::RebuttalCompleteness => {
                Some(prompts::PERTURB_REBUTTAL_COMPLETENESS)
            }
            _ => None,
        }
    }

    fn binding_name(self) -> &'static str {
        match self.mode() {
            Mode::Paper => "Paper Content here",
            Mode::Review => "Review Content here",
            Mode::Rebuttal => "Rebuttal Content here",
        }
    }
}

impl fmt::Display for PerturbationAspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.mode(), self.aspect_name())
    }
}

impl FromStr for PerturbationAspect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PerturbationAspect::ALL
            .iter()
            .find(|a| a.to_string() == s)
            .copied()
            .ok_or_else(|| format!("unknown aspect {s:?} (expected <mode>.<aspect>)"))
    }
}

impl Serialize for PerturbationAspect {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PerturbationAspect {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// One anchor-located span replacement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    pub target_doc: String,
    pub start_anchor: String,
    pub end_anchor: String,
    pub replacement: String,
    pub applied: bool,
    pub failure_reason: Option<String>,
}

/// Claim indices inserted into one review under (review, factual).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertedClaims {
    pub review_id: String,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationLog {
    pub bundle_id: String,
    pub aspect: PerturbationAspect,
    pub edits: Vec<EditRecord>,
    pub llm_call_count: u32,
    /// Present iff aspect = review.factual.
    pub inserted_claims: Option<Vec<InsertedClaims>>,
}

impl PerturbationLog {
    pub fn applied_count(&self) -> usize {
        self.edits.iter().filter(|e| e.applied).count()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub model_id: String,
    pub temperature: f64,
    /// Per-aspect temperature overrides, keyed by "<mode>.<aspect>".
    pub temperature_overrides: BTreeMap<String, f64>,
    pub max_output_tokens: u32,
    /// Whole-response retries when zero edit blocks parse.
    pub retries: u32,
    pub seed: u64,
}

impl PerturbConfig {
    pub fn new(model_id: &str, seed: u64) -> PerturbConfig {
        PerturbConfig {
            model_id: model_id.to_string(),
            temperature: 0.0,
            temperature_overrides: BTreeMap::new(),
            max_output_tokens: 4096,
            retries: 1,
            seed,
        }
    }

    fn temperature_for(&self, aspect: PerturbationAspect) -> f64 {
        self.temperature_overrides
            .get(&aspect.to_string())
            .copied()
            .unwrap_or(self.temperature)
    }
}

/// Prompt once (plus configured retries when no edit block parses) and apply
/// the parsed edits to `doc_text`.
fn prompt_and_edit(
    gateway: &Gateway,
    config: &PerturbConfig,
    aspect: PerturbationAspect,
    tag: &str,
    target_doc: &str,
    doc_text: &str,
    calls: &mut u32,
) -> Result<(String, Vec<EditRecord>), PerturbError> {
    let template = aspect.template_id().expect("llm aspect has a template");
    let mut bindings = BTreeMap::new();
    bindings.insert(aspect.binding_name().to_string(), doc_text.to_string());
    let prompt = prompts::render_prompt(template, &bindings)?;

    let mut user_prompt = prompt;
    for attempt in 0..=config.retries {
        let request = LlmRequest {
            model_id: config.model_id.clone(),
            system_prompt: None,
            user_prompt: user_prompt.clone(),
            max_output_tokens: config.max_output_tokens,
            temperature: config.temperature_for(aspect),
            request_tag: tag.to_string(),
        };
        let response = gateway.complete(&request)?;
        *calls += 1;
        let parsed = parse_edit_blocks(&response.text);
        if parsed.is_empty() {
            if attempt < config.retries {
                user_prompt.push_str(
                    "\n\nReminder: output at least one edit block following the template exactly.",
                );
                continue;
            }
            let record = EditRecord {
                target_doc: target_doc.to_string(),
                start_anchor: String::new(),
                end_anchor: String::new(),
                replacement: String::new(),
                applied: false,
                failure_reason: Some("no edit blocks parsed from response".to_string()),
            };
            return Ok((doc_text.to_string(), vec![record]));
        }
        return Ok(apply_parsed_edits(doc_text, target_doc, &parsed));
    }
    unreachable!("retry loop always returns");
}

/// Run one of the seven LLM-driven aspects against a bundle.
///
/// Exactly one component of the returned bundle differs from the input: the
/// paper (taxonomy-selected sections only, for contribution/soundness), every
/// review's raw text, or every rebuttal body. Unapplied edits are logged with
/// their failure reason; a bundle where nothing applied is an error so the
/// caller can exclude it from paired analysis.
pub fn perturb_with_llm(
    bundle: &Bundle,
    aspect: PerturbationAspect,
    gateway: &Gateway,
    rules: &TaxonomyRules,
    config: &PerturbConfig,
) -> Result<(Bundle, PerturbationLog), PerturbError> {
    if !aspect.is_llm_edit() {
        return Err(PerturbError::InvalidAspect {
            aspect,
            expected: "one of the seven LLM-driven aspects",
        });
    }

    let bundle_id = bundle.bundle_id().to_string();
    let mut perturbed = bundle.clone();
    let mut edits = Vec::new();
    let mut calls = 0u32;

    match aspect.mode() {
        Mode::Paper => {
            let paper_aspect = aspect.paper_aspect().expect("paper-mode aspect");
            let targets = taxonomy::select_target_sections(&bundle.paper, paper_aspect, rules)?;
            for index in targets {
                let target_doc = format!("paper#section{index}");
                let tag = format!("perturb/{aspect}/{bundle_id}/section{index}");
                let body = perturbed.paper.sections[index].body.clone();
                let (new_body, records) = prompt_and_edit(
                    gateway,
                    config,
                    aspect,
                    &tag,
                    &target_doc,
                    &body,
                    &mut calls,
                )?;
                perturbed.paper.sections[index].body = new_body;
                edits.extend(records);
            }
        }
        Mode::Review => {
            for i in 0..perturbed.reviews.len() {
                let review_id = perturbed.reviews[i].review_id.clone();
                let target_doc = format!("review:{review_id}");
                let tag = format!("perturb/{aspect}/{bundle_id}/{review_id}");
                let raw = perturbed.reviews[i].raw_text.clone();
                let (new_raw, mut records) =
                    prompt_and_edit(gateway, config, aspect, &tag, &target_doc, &raw, &mut calls)?;
                if new_raw != raw {
                    let mut candidate = perturbed.reviews[i].clone();
                    candidate.raw_text = new_raw;
                    match candidate.resync_from_raw_text() {
                        Ok(()) => perturbed.reviews[i] = candidate,
                        Err(reason) => {
                            // Keep the original review rather than shipping an
                            // inconsistent document.
                            for record in &mut records {
                                if record.applied {
                                    record.applied = false;
                                    record.failure_reason =
                                        Some(format!("post-edit reparse failed: {reason}"));
                                }
                            }
                        }
                    }
                }
                edits.extend(records);
            }
        }
        Mode::Rebuttal => {
            for i in 0..perturbed.rebuttals.len() {
                let review_id = perturbed.rebuttals[i].review_id.clone();
                let target_doc = format!("rebuttal:{review_id}");
                let tag = format!("perturb/{aspect}/{bundle_id}/{review_id}");
                let body = perturbed.rebuttals[i].body.clone();
                let (new_body, records) = prompt_and_edit(
                    gateway,
                    config,
                    aspect,
                    &tag,
                    &target_doc,
                    &body,
                    &mut calls,
                )?;
                perturbed.rebuttals[i].body = new_body;
                edits.extend(records);
            }
        }
    }

    let log = PerturbationLog {
        bundle_id: bundle_id.clone(),
        aspect,
        edits,
        llm_call_count: calls,
        inserted_claims: None,
    };
    if log.applied_count() == 0 {
        return Err(PerturbError::AllEditsFailed {
            bundle_id,
            log: Box::new(log),
        });
    }
    Ok((perturbed, log))
}

/// Apply any of the nine aspects, dispatching to the LLM path or the
/// rule-based operators. Returns the false claim bucket for (review, factual)
/// so callers can persist it for manual evaluation.
pub fn perturb_bundle(
    bundle: &Bundle,
    aspect: PerturbationAspect,
    gateway: &Gateway,
    rules: &TaxonomyRules,
    config: &PerturbConfig,
) -> Result<(Bundle, PerturbationLog, Option<FalseClaimBucket>), PerturbError> {
    match aspect {
        PerturbationAspect::ReviewConclusion => {
            let mut perturbed = bundle.clone();
            let mut edits = Vec::new();
            for i in 0..perturbed.reviews.len() {
                let (flipped, records) = flip_conclusion(&perturbed.reviews[i]);
                perturbed.reviews[i] = flipped;
                edits.extend(records);
            }
            let log = PerturbationLog {
                bundle_id: bundle.bundle_id().to_string(),
                aspect,
                edits,
                llm_call_count: 0,
                inserted_claims: None,
            };
            if log.applied_count() == 0 {
                return Err(PerturbError::AllEditsFailed {
                    bundle_id: bundle.bundle_id().to_string(),
                    log: Box::new(log),
                });
            }
            Ok((perturbed, log, None))
        }
        PerturbationAspect::ReviewFactual => {
            let (bucket, bucket_calls) = build_false_claim_bucket(&bundle.paper, gateway, config)?;
            let mut perturbed = bundle.clone();
            let mut edits = Vec::new();
            let mut inserted = Vec::new();
            for i in 0..perturbed.reviews.len() {
                let review = &perturbed.reviews[i];
                let review_seed = config
                    .seed
                    .wrapping_add(rng::stable_hash(&review.review_id));
                let (with_claims, indices) = insert_false_claims(review, &bucket, review_seed)?;
                for &index in &indices {
                    let claim = &bucket.claims[index].claim;
                    edits.push(EditRecord {
                        target_doc: format!("review:{}", review.review_id),
                        start_anchor: first_words(claim, 4),
                        end_anchor: last_words(claim, 4),
                        replacement: format!("- {claim}"),
                        applied: true,
                        failure_reason: None,
                    });
                }
                inserted.push(InsertedClaims {
                    review_id: review.review_id.clone(),
                    indices,
                });
                perturbed.reviews[i] = with_claims;
            }
            let log = PerturbationLog {
                bundle_id: bundle.bundle_id().to_string(),
                aspect,
                edits,
                llm_call_count: bucket_calls,
                inserted_claims: Some(inserted),
            };
            Ok((perturbed, log, Some(bucket)))
        }
        _ => {
            let (perturbed, log) = perturb_with_llm(bundle, aspect, gateway, rules, config)?;
            Ok((perturbed, log, None))
        }
    }
}

fn first_words(text: &str, n: usize) -> String {
    text.split_whitespace()
        .take(n)
        .collect::<Vec<_>>()
        .join(" ")
}

fn last_words(text: &str, n: usize) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let start = words.len().saturating_sub(n);
    words[start..].join(" ")
}
