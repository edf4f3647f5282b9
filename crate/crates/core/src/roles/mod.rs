//! LLM-as-Reviewer and LLM-as-Meta-Reviewer.
//!
//! The reviewer ingests only the paper and returns dimension scores (1-4)
//! plus an overall rating (1-10). The meta-reviewer ingests the paper with
//! interleaved (review, rebuttal) blocks in stored order and returns an
//! overall score and a final decision, under one of three output scaffolds.

pub mod parse;
pub mod prompts;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Bundle, PaperDocument};
use crate::llmgate::{FinishReason, Gateway, GatewayError, LlmRequest};

use parse::{extract_decision, extract_score, extract_section, FieldIssue};

#[derive(Debug, Error)]
pub enum RoleError {
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("template {template}: unbound placeholder [{name}]")]
    UnboundPlaceholder { template: String, name: String },
    #[error("response parse failed after retry: {issues}")]
    ParseError { issues: String },
    #[error("response was truncated (increase max_output_tokens or allow truncation)")]
    Truncated,
    #[error("provider refused the request")]
    Refused,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Meta-reviewer output scaffold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CotVariant {
    None,
    Dimension,
    Template,
}

impl CotVariant {
    pub const ALL: [CotVariant; 3] = [
        CotVariant::None,
        CotVariant::Dimension,
        CotVariant::Template,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CotVariant::None => "none",
            CotVariant::Dimension => "dimension",
            CotVariant::Template => "template",
        }
    }

    pub fn parse(text: &str) -> Option<CotVariant> {
        match text {
            "none" => Some(CotVariant::None),
            "dimension" => Some(CotVariant::Dimension),
            "template" => Some(CotVariant::Template),
            _ => None,
        }
    }

    fn template_id(self) -> &'static str {
        match self {
            CotVariant::None => prompts::META_NONE,
            CotVariant::Dimension => prompts::META_DIMENSION,
            CotVariant::Template => prompts::META_TEMPLATE,
        }
    }
}

impl std::fmt::Display for CotVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalDecision {
    Reject,
    AcceptPoster,
    AcceptSpotlight,
    AcceptOral,
}

impl FinalDecision {
    pub const ORDER: [FinalDecision; 4] = [
        FinalDecision::Reject,
        FinalDecision::AcceptPoster,
        FinalDecision::AcceptSpotlight,
        FinalDecision::AcceptOral,
    ];

    pub fn is_accept(self) -> bool {
        self != FinalDecision::Reject
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FinalDecision::Reject => "reject",
            FinalDecision::AcceptPoster => "accept_poster",
            FinalDecision::AcceptSpotlight => "accept_spotlight",
            FinalDecision::AcceptOral => "accept_oral",
        }
    }
}

impl std::fmt::Display for FinalDecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerOutput {
    pub summary: String,
    pub strengths: String,
    pub weaknesses: String,
    pub contribution_score: i32,
    pub soundness_score: i32,
    pub presentation_score: i32,
    pub overall_rating: i32,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaReviewerOutput {
    pub variant: CotVariant,
    pub contribution_score: Option<i32>,
    pub soundness_score: Option<i32>,
    pub presentation_score: Option<i32>,
    pub metareview: Option<String>,
    pub why_not_higher: Option<String>,
    pub why_not_lower: Option<String>,
    pub overall_score: i32,
    pub final_decision: FinalDecision,
    pub raw_text: String,
}

#[derive(Debug, Clone)]
pub struct RoleOptions {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Budget for the paper text inside the prompt; papers over it are
    /// truncated at section boundaries from the end, with a logged warning.
    pub max_paper_chars: Option<usize>,
    pub allow_truncated: bool,
    pub request_tag: String,
}

impl RoleOptions {
    pub fn new(model_id: &str, request_tag: &str) -> RoleOptions {
        RoleOptions {
            model_id: model_id.to_string(),
            temperature: 0.0,
            max_output_tokens: 4096,
            max_paper_chars: None,
            allow_truncated: false,
            request_tag: request_tag.to_string(),
        }
    }
}

/// Paper text for prompting, truncated at section boundaries when over budget.
pub fn paper_text_for_prompt(paper: &PaperDocument, max_chars: Option<usize>) -> String {
    let full = paper.serialize_text();
    let Some(limit) = max_chars else {
        return full;
    };
    if full.len() <= limit {
        return full;
    }
    let mut kept = paper.sections.len();
    let mut text = full;
    while kept > 1 && text.len() > limit {
        kept -= 1;
        let mut out = String::new();
        for section in &paper.sections[..kept] {
            section.serialize_to(&mut out);
        }
        text = out;
    }
    log::warn!(
        "paper {} exceeds the prompt budget ({} chars): truncated to {} of {} sections",
        paper.paper_id,
        limit,
        kept,
        paper.sections.len()
    );
    text
}

fn issues_to_string(issues: &[FieldIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn parse_reviewer_text(text: &str) -> Result<ReviewerOutput, Vec<FieldIssue>> {
    let mut issues = Vec::new();
    let mut score = |label: &str, lo, hi| match extract_score(text, label, lo, hi) {
        Ok(v) => Some(v),
        Err(issue) => {
            issues.push(issue);
            None
        }
    };
    let contribution = score("Contribution", 1, 4);
    let soundness = score("Soundness", 1, 4);
    let presentation = score("Presentation", 1, 4);
    let rating = score("Rating", 1, 10);
    if !issues.is_empty() {
        return Err(issues);
    }
    let stops = [
        "strength",
        "weakness",
        "scores",
        "contribution",
        "soundness",
        "presentation",
        "rating",
    ];
    Ok(ReviewerOutput {
        summary: extract_section(text, "Summary", &stops),
        strengths: extract_section(text, "Strength", &stops[1..]),
        weaknesses: extract_section(text, "Weakness", &stops[2..]),
        contribution_score: contribution.unwrap(),
        soundness_score: soundness.unwrap(),
        presentation_score: presentation.unwrap(),
        overall_rating: rating.unwrap(),
        raw_text: text.to_string(),
    })
}

fn parse_meta_text(text: &str, variant: CotVariant) -> Result<MetaReviewerOutput, Vec<FieldIssue>> {
    let mut issues = Vec::new();
    let overall = match extract_score(text, "Overall Score", 1, 10) {
        Ok(v) => Some(v),
        Err(issue) => {
            issues.push(issue);
            None
        }
    };
    let decision = match extract_decision(text) {
        Ok(d) => Some(d),
        Err(issue) => {
            issues.push(issue);
            None
        }
    };

    let mut dims = (None, None, None);
    if variant == CotVariant::Dimension {
        let mut dim = |label: &str| match extract_score(text, label, 1, 4) {
            Ok(v) => Some(v),
            Err(issue) => {
                issues.push(issue);
                None
            }
        };
        dims = (dim("Contribution"), dim("Soundness"), dim("Presentation"));
    }

    let mut texts = (None, None, None);
    if variant == CotVariant::Template {
        let stops = [
            "justification for why not higher score",
            "justification for why not lower score",
            "overall score",
            "final decision",
        ];
        let metareview = extract_section(text, "Metareview", &stops);
        let higher = extract_section(text, "Justification For Why Not Higher Score", &stops[1..]);
        let lower = extract_section(text, "Justification For Why Not Lower Score", &stops[2..]);
        for (label, value) in [
            ("Metareview", &metareview),
            ("Justification For Why Not Higher Score", &higher),
            ("Justification For Why Not Lower Score", &lower),
        ] {
            if value.is_empty() {
                issues.push(FieldIssue::Missing(label.to_string()));
            }
        }
        texts = (Some(metareview), Some(higher), Some(lower));
    }

    if !issues.is_empty() {
        return Err(issues);
    }
    Ok(MetaReviewerOutput {
        variant,
        contribution_score: dims.0,
        soundness_score: dims.1,
        presentation_score: dims.2,
        metareview: texts.0,
        why_not_higher: texts.1,
        why_not_lower: texts.2,
        overall_score: overall.unwrap(),
        final_decision: decision.unwrap(),
        raw_text: text.to_string(),
    })
}

const FORMAT_REMINDER: &str = "\n\nReminder: follow the output template exactly, including one \
line per score (e.g. \"Contribution: 3\", \"Rating: 6\", \"Overall Score: 6\") and, for \
meta-reviews, a \"Final Decision:\" line naming one of Reject, Accept as Poster, Accept as \
Spotlight, Accept as Oral.";

/// Call the gateway and parse; one retry with a format reminder appended.
fn complete_and_parse<T>(
    gateway: &Gateway,
    options: &RoleOptions,
    user_prompt: &str,
    parse: impl Fn(&str) -> Result<T, Vec<FieldIssue>>,
) -> Result<T, RoleError> {
    let mut prompt = user_prompt.to_string();
    let mut last_issues = String::new();
    for attempt in 0..2 {
        let request = LlmRequest {
            model_id: options.model_id.clone(),
            system_prompt: None,
            user_prompt: prompt.clone(),
            max_output_tokens: options.max_output_tokens,
            temperature: options.temperature,
            request_tag: options.request_tag.clone(),
        };
        let response = gateway.complete(&request)?;
        match response.finish_reason {
            FinishReason::Complete => {}
            FinishReason::Truncated if options.allow_truncated => {}
            FinishReason::Truncated => return Err(RoleError::Truncated),
            FinishReason::Refused | FinishReason::Error => return Err(RoleError::Refused),
        }
        match parse(&response.text) {
            Ok(parsed) => return Ok(parsed),
            Err(issues) => {
                last_issues = issues_to_string(&issues);
                if attempt == 0 {
                    prompt.push_str(FORMAT_REMINDER);
                }
            }
        }
    }
    Err(RoleError::ParseError {
        issues: last_issues,
    })
}

/// LLM-as-Reviewer: sees only the paper.
pub fn run_reviewer(
    paper: &PaperDocument,
    gateway: &Gateway,
    options: &RoleOptions,
) -> Result<ReviewerOutput, RoleError> {
    let prompt = render_reviewer_prompt(paper, options)?;
    complete_and_parse(gateway, options, &prompt, parse_reviewer_text)
}

pub fn render_reviewer_prompt(
    paper: &PaperDocument,
    options: &RoleOptions,
) -> Result<String, RoleError> {
    let mut bindings = BTreeMap::new();
    bindings.insert(
        "Paper Content here".to_string(),
        paper_text_for_prompt(paper, options.max_paper_chars),
    );
    prompts::render_prompt(prompts::REVIEWER, &bindings)
}

/// LLM-as-Meta-Reviewer: paper plus interleaved (review, rebuttal) blocks.
pub fn run_meta_reviewer(
    bundle: &Bundle,
    variant: CotVariant,
    gateway: &Gateway,
    options: &RoleOptions,
) -> Result<MetaReviewerOutput, RoleError> {
    let prompt = render_meta_prompt(bundle, variant, options)?;
    complete_and_parse(gateway, options, &prompt, |text| {
        parse_meta_text(text, variant)
    })
}

pub fn render_meta_prompt(
    bundle: &Bundle,
    variant: CotVariant,
    options: &RoleOptions,
) -> Result<String, RoleError> {
    let mut blocks = String::new();
    for (i, review) in bundle.reviews.iter().enumerate() {
        let n = i + 1;
        blocks.push_str(&format!(
            "Review {n} Content:\n{}\n\n",
            review.raw_text.trim_end()
        ));
        let rebuttal = bundle
            .rebuttal_for(&review.review_id)
            .map(|r| r.body.as_str())
            .unwrap_or("(no rebuttal provided)");
        blocks.push_str(&format!(
            "Rebuttal {n} Content:\n{}\n\n",
            rebuttal.trim_end()
        ));
    }
    let mut bindings = BTreeMap::new();
    bindings.insert(
        "Paper Content here".to_string(),
        paper_text_for_prompt(&bundle.paper, options.max_paper_chars),
    );
    bindings.insert(
        "Reviews and Rebuttals Content here".to_string(),
        blocks.trim_end().to_string(),
    );
    prompts::render_prompt(variant.template_id(), &bindings)
}

/// Tolerant labeled-line extraction, exposed for analysis tooling.
pub fn parse_scores(text: &str, label: &str, lo: i32, hi: i32) -> Result<i32, RoleError> {
    extract_score(text, label, lo, hi).map_err(|issue| RoleError::ParseError {
        issues: issue.to_string(),
    })
}
