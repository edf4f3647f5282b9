//! Perturbation accounting: per-aspect edit statistics and the seeded
//! manual-evaluation manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng;

use super::{FalseClaimBucket, PerturbError, PerturbationAspect, PerturbationLog};

/// Descriptive statistics over applied edits per bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspectStats {
    pub bundles: usize,
    pub sum: u64,
    pub mean: f64,
    pub min: u64,
    pub max: u64,
}

/// Group logs by aspect and summarize applied-edit counts per bundle.
/// Aspects with no logs are absent from the result.
pub fn summarize_perturbations(
    logs: &[PerturbationLog],
) -> BTreeMap<PerturbationAspect, AspectStats> {
    let mut grouped: BTreeMap<PerturbationAspect, Vec<u64>> = BTreeMap::new();
    for log in logs {
        grouped
            .entry(log.aspect)
            .or_default()
            .push(log.applied_count() as u64);
    }
    grouped
        .into_iter()
        .map(|(aspect, counts)| {
            let sum: u64 = counts.iter().sum();
            let stats = AspectStats {
                bundles: counts.len(),
                sum,
                mean: sum as f64 / counts.len() as f64,
                min: *counts.iter().min().unwrap(),
                max: *counts.iter().max().unwrap(),
            };
            (aspect, stats)
        })
        .collect()
}

/// One row of the manual-evaluation manifest; `verdict` stays blank for the
/// human annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRow {
    pub mode: String,
    pub aspect: String,
    pub bundle_id: String,
    pub before_excerpt: String,
    pub after_excerpt: String,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalManifest {
    pub rows: Vec<EvalRow>,
}

impl EvalManifest {
    pub fn write_csv(&self, path: &Path) -> Result<(), String> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| e.to_string())?;
        writer
            .write_record([
                "mode",
                "aspect",
                "bundle_id",
                "before_excerpt",
                "after_excerpt",
                "verdict",
            ])
            .map_err(|e| e.to_string())?;
        for row in &self.rows {
            writer
                .write_record([
                    &row.mode,
                    &row.aspect,
                    &row.bundle_id,
                    &row.before_excerpt,
                    &row.after_excerpt,
                    &row.verdict,
                ])
                .map_err(|e| e.to_string())?;
        }
        writer.flush().map_err(|e| e.to_string())
    }
}

/// Aspects subject to manual evaluation: everything except the score
/// substitution of review.conclusion.
pub fn manual_eval_aspects() -> Vec<PerturbationAspect> {
    PerturbationAspect::ALL
        .iter()
        .copied()
        .filter(|a| *a != PerturbationAspect::ReviewConclusion)
        .collect()
}

/// Seeded sample of `per_aspect` applied edits per evaluated aspect plus
/// `claim_sample` false claims, as an annotation manifest with blank verdicts.
pub fn sample_for_manual_eval(
    logs: &[PerturbationLog],
    buckets: &[FalseClaimBucket],
    per_aspect: usize,
    claim_sample: usize,
    seed: u64,
) -> Result<EvalManifest, PerturbError> {
    let mut rows = Vec::new();

    for (stream, aspect) in manual_eval_aspects().into_iter().enumerate() {
        let candidates: Vec<EvalRow> = logs
            .iter()
            .filter(|log| log.aspect == aspect)
            .flat_map(|log| {
                log.edits
                    .iter()
                    .filter(|e| e.applied)
                    .map(move |edit| EvalRow {
                        mode: aspect.mode().to_string(),
                        aspect: aspect.aspect_name().to_string(),
                        bundle_id: log.bundle_id.clone(),
                        before_excerpt: format!("{} ... {}", edit.start_anchor, edit.end_anchor),
                        after_excerpt: edit.replacement.clone(),
                        verdict: String::new(),
                    })
            })
            .collect();
        if candidates.len() < per_aspect {
            return Err(PerturbError::InsufficientSamples {
                what: format!("{aspect} edits"),
                need: per_aspect,
                have: candidates.len(),
            });
        }
        let mut rng = rng::seeded_rng(seed, stream as u64);
        let picked = rng::sample_indices(&mut rng, candidates.len(), per_aspect);
        rows.extend(picked.into_iter().map(|i| candidates[i].clone()));
    }

    let claim_rows: Vec<EvalRow> = buckets
        .iter()
        .flat_map(|bucket| {
            bucket.claims.iter().map(move |claim| EvalRow {
                mode: "review".to_string(),
                aspect: "factual_claim".to_string(),
                bundle_id: bucket.paper_id.clone(),
                before_excerpt: String::new(),
                after_excerpt: claim.claim.clone(),
                verdict: String::new(),
            })
        })
        .collect();
    if claim_rows.len() < claim_sample {
        return Err(PerturbError::InsufficientSamples {
            what: "false claims".to_string(),
            need: claim_sample,
            have: claim_rows.len(),
        });
    }
    let mut rng = rng::seeded_rng(seed, 100);
    let picked = rng::sample_indices(&mut rng, claim_rows.len(), claim_sample);
    rows.extend(picked.into_iter().map(|i| claim_rows[i].clone()));

    Ok(EvalManifest { rows })
}
