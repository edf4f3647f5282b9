// Shared by several test binaries; each uses a different subset.
#![allow(dead_code)]

//! Synthetic 6-bundle corpus and the mock response script driving it.
//!
//! The same bundle definitions feed both the corpus writer and the script
//! writer, and perturbation targets are computed with the real taxonomy
//! rules, so scripted tags and anchors always match what the pipeline asks
//! for. Score patterns are arranged so the verdict grid exercises all four
//! verdicts (increase, decrease, invariance, inconclusive).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use review_perturb::corpus::parse_sections;
use review_perturb::corpus::{
    save_bundle, AcceptanceCategory, Bundle, CorpusEntry, CorpusIndex, PaperDocument,
    RebuttalDocument, ReviewDocument,
};
use review_perturb::perturb::PerturbationAspect;
use review_perturb::taxonomy::{self, TaxonomyRules};

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub struct BundleSpec {
    pub id: &'static str,
    pub category: AcceptanceCategory,
    pub title: &'static str,
    pub topic: &'static str,
}

pub const BUNDLES: [BundleSpec; 6] = [
    BundleSpec {
        id: "b01",
        category: AcceptanceCategory::Poster,
        title: "Sparse Routing for Faster Inference",
        topic: "sparse routing",
    },
    BundleSpec {
        id: "b02",
        category: AcceptanceCategory::Poster,
        title: "Curriculum Distillation with Soft Labels",
        topic: "curriculum distillation",
    },
    BundleSpec {
        id: "b03",
        category: AcceptanceCategory::Poster,
        title: "Contrastive Objectives for Tabular Data",
        topic: "contrastive objectives",
    },
    BundleSpec {
        id: "b04",
        category: AcceptanceCategory::Spotlight,
        title: "Retrieval Memory for Long Context Reading",
        topic: "retrieval memory",
    },
    BundleSpec {
        id: "b05",
        category: AcceptanceCategory::Poster,
        title: "Equivariant Message Passing on Lattices",
        topic: "equivariant message passing",
    },
    BundleSpec {
        id: "b06",
        category: AcceptanceCategory::Oral,
        title: "Quantized Adapters for Edge Deployment",
        topic: "quantized adapters",
    },
];

fn paper_text(spec: &BundleSpec) -> String {
    let id = spec.id;
    let topic = spec.topic;
    format!(
        "# {title}\nAbstract: {topic} yields practical gains on {id}. We outline a simple recipe and report consistent improvements.\n\n\
         ## Introduction\nThe study of {topic} motivates this work on {id}. Interest in {topic} keeps growing across applications. We summarize our findings and position {id} relative to existing systems.\n\n\
         ## Method\nWe describe the procedure for {id} in full. We train with batch size 32 and learning rate 0.001 on {id}. The update rule is $\\theta_{{t+1}} = \\theta_t - \\eta g_t$ applied per step.\n\n\
         ## Experiments\nWe evaluate {id} on three public datasets. Accuracy improves by 2.1 points over the baseline on {id}.\n\n\
         | split | accuracy |\n|---|---|\n| dev | 91.2 |\n| test | 90.4 |\n\n\
         ## Related Work\nEarlier systems approached {topic} with static pipelines before {id}. Our treatment differs in granularity and scope.\n\n\
         ## Conclusion\nWe presented {topic} for {id} and verified the gains. Future revisions will extend coverage to more domains.\n",
        title = spec.title,
    )
}

fn reviews_for(spec: &BundleSpec) -> Vec<ReviewDocument> {
    let id = spec.id;
    let topic = spec.topic;
    vec![
        ReviewDocument::from_fields(
            "r1",
            id,
            &format!("This paper studies {topic} for {id}."),
            "The core idea is easy to adopt and clearly explained.",
            &format!("The evaluation appears limited to small datasets for {id}."),
            3,
            3,
            2,
            6,
        ),
        ReviewDocument::from_fields(
            "r2",
            id,
            &format!("The work develops {topic} with a practical recipe for {id}."),
            "Results are consistent across the reported splits.",
            &format!("Ablations are thin and transfer behavior is unmeasured for {id}."),
            2,
            3,
            3,
            5,
        ),
    ]
}

fn rebuttals_for(spec: &BundleSpec) -> Vec<RebuttalDocument> {
    let id = spec.id;
    vec![
        RebuttalDocument {
            paper_id: id.to_string(),
            review_id: "r1".to_string(),
            body: format!(
                "Thank you for the careful reading of {id}. We added two datasets and report gains of 1.8 points in the revision. We will release configs for full reproducibility."
            ),
        },
        RebuttalDocument {
            paper_id: id.to_string(),
            review_id: "r2".to_string(),
            body: format!(
                "We appreciate the detailed comments on {id}. The requested ablation now covers four settings with seeds fixed at 7. Transfer results appear in the new appendix."
            ),
        },
    ]
}

pub fn fixture_bundles() -> Vec<Bundle> {
    BUNDLES
        .iter()
        .map(|spec| {
            let text = paper_text(spec);
            let sections = parse_sections(Path::new("fixture.mmd"), &text).expect("fixture parses");
            Bundle {
                paper: PaperDocument {
                    paper_id: spec.id.to_string(),
                    decision_category: spec.category,
                    sections,
                },
                reviews: reviews_for(spec),
                rebuttals: rebuttals_for(spec),
            }
        })
        .collect()
}

pub fn write_fixture_corpus(dir: &Path) {
    if dir.exists() {
        fs::remove_dir_all(dir).unwrap();
    }
    fs::create_dir_all(dir).unwrap();
    let bundles = fixture_bundles();
    let index = CorpusIndex {
        schema_version: 1,
        bundles: BUNDLES
            .iter()
            .map(|spec| CorpusEntry {
                dir: spec.id.to_string(),
                paper_id: spec.id.to_string(),
                decision_category: spec.category,
            })
            .collect(),
    };
    index.save(&dir.join("corpus.json")).unwrap();
    for bundle in &bundles {
        save_bundle(&dir.join(bundle.bundle_id()), bundle).unwrap();
    }
}

// ---------------------------------------------------------------------------
// Mock responses
// ---------------------------------------------------------------------------

fn edit_block(start: &str, end: &str, replacement: &str) -> String {
    format!(
        "1.Text Span to Edit\n-Start Words: {start}\n-Ending Words: {end}\n2. Edited Text Span\n{replacement}\n"
    )
}

/// Per-section edit for a paper aspect; anchors name sentences that exist in
/// the section bodies written above.
fn paper_edit(aspect: PerturbationAspect, section_title: &str, spec: &BundleSpec) -> String {
    let id = spec.id;
    let topic = spec.topic;
    match (aspect, section_title) {
        (PerturbationAspect::PaperContribution, "Introduction") => edit_block(
            "The study of",
            &format!("work on {id}."),
            &format!("Our {topic} study is the first comprehensive treatment of its kind for {id}."),
        ),
        (PerturbationAspect::PaperContribution, "Related Work") => edit_block(
            "Our treatment differs",
            "granularity and scope.",
            "Unlike all previous methods, our treatment achieves perfect coverage in granularity and scope.",
        ),
        (PerturbationAspect::PaperContribution, "Conclusion") => edit_block(
            "We presented",
            "verified the gains.",
            &format!("We presented the groundbreaking {topic} for {id}, unmatched by any prior system."),
        ),
        (PerturbationAspect::PaperSoundness, "Method") => edit_block(
            "We train with",
            &format!("0.001 on {id}."),
            &format!("We train a network with standard settings on {id}."),
        ),
        (PerturbationAspect::PaperSoundness, "Experiments") => edit_block(
            "Accuracy improves by",
            &format!("baseline on {id}."),
            &format!("Accuracy improves in most settings on {id}."),
        ),
        (PerturbationAspect::PaperPresentation, title) => {
            let block = match title {
                "Introduction" => edit_block(
                    "Interest in",
                    "growing across applications.",
                    &format!("Intrest in {topic} keep growing acros aplications."),
                ),
                "Method" => edit_block(
                    "We describe the",
                    &format!("for {id} in full."),
                    &format!("We descibe the procedur for {id} in ful."),
                ),
                "Experiments" => edit_block(
                    "We evaluate",
                    "three public datasets.",
                    &format!("We evaluat {id} on three publc datsets."),
                ),
                "Related Work" => edit_block(
                    "Earlier systems approached",
                    &format!("pipelines before {id}."),
                    &format!("Earlier systms aproached {topic} with static piplines befor {id}."),
                ),
                "Conclusion" => edit_block(
                    "Future revisions will",
                    "to more domains.",
                    "Futur revisons will extnd coverag to more domans.",
                ),
                // The title section: its body is the abstract paragraph.
                _ => {
                    let mut block = edit_block(
                        "We outline a",
                        "consistent improvements.",
                        "We outlien a simple recipie and reprot consistant improvments.",
                    );
                    if spec.id == "b03" {
                        // One scripted failure: anchors that exist nowhere,
                        // exercising the skip-and-log path in the golden run.
                        block.push_str(&edit_block(
                            "totally absent anchor words",
                            "equally missing ending words",
                            "this replacement must never be applied",
                        ));
                    }
                    block
                }
            };
            block
        }
        _ => unreachable!("no scripted edit for {aspect} / {section_title}"),
    }
}

fn review_tone_edit(review_id: &str, spec: &BundleSpec) -> String {
    let id = spec.id;
    match review_id {
        "r1" => edit_block(
            "The evaluation appears",
            &format!("datasets for {id}."),
            &format!("The fatally flawed evaluation cannot support a single claim for {id}."),
        ),
        _ => edit_block(
            "Ablations are thin",
            &format!("unmeasured for {id}."),
            &format!("The laughably thin ablations make this submission worthless for {id}."),
        ),
    }
}

fn rebuttal_edit(aspect: PerturbationAspect, review_id: &str, spec: &BundleSpec) -> String {
    let id = spec.id;
    match (aspect, review_id) {
        (PerturbationAspect::RebuttalTone, "r1") => edit_block(
            "Thank you for",
            &format!("reading of {id}."),
            &format!("This review fundamentally misreads {id} and calls the reviewer's care into question."),
        ),
        (PerturbationAspect::RebuttalTone, _) => edit_block(
            "We appreciate the",
            &format!("comments on {id}."),
            &format!("These detailed comments on {id} offer no value whatsoever."),
        ),
        (PerturbationAspect::RebuttalPresentation, "r1") => edit_block(
            "We added two",
            "in the revision.",
            "We addd two datsets and reprot gains of 1.8 point in the revison.",
        ),
        (PerturbationAspect::RebuttalPresentation, _) => edit_block(
            "The requested ablation",
            "seeds fixed at 7.",
            "The requsted ablaton now cover four setings with seeds fixd at 7.",
        ),
        (PerturbationAspect::RebuttalCompleteness, "r1") => edit_block(
            "We added two",
            "full reproducibility.",
            "We will consider this suggestion.",
        ),
        (PerturbationAspect::RebuttalCompleteness, _) => edit_block(
            "The requested ablation",
            "the new appendix.",
            "We will look into it at some point.",
        ),
        _ => unreachable!(),
    }
}

fn bucket_response(spec: &BundleSpec) -> String {
    let id = spec.id;
    let claims = [
        format!("The authors used only two training samples for {id}."),
        format!("No baseline comparisons were run for {id}."),
        format!("{id} reports no quantitative results at all."),
        format!("The datasets used in {id} are proprietary and unavailable."),
        format!("The method in {id} requires a thousand GPUs to train."),
    ];
    claims
        .iter()
        .map(|claim| {
            format!(
                "False Claim: {claim}\nWhy the claim is false: The manuscript documents the opposite in detail.\nWhy the claim is weakness: If true, it would undermine the validity of the findings.\n"
            )
        })
        .collect()
}

// Score patterns. Index = bundle position 0..6.

const BASE_REV_CONTRIBUTION: [i32; 6] = [3, 3, 2, 3, 3, 3];
const BASE_REV_SOUNDNESS: [i32; 6] = [3, 2, 3, 3, 3, 2];
const BASE_REV_PRESENTATION: [i32; 6] = [2, 3, 3, 2, 3, 3];
const BASE_REV_RATING: [i32; 6] = [6, 5, 6, 8, 6, 5];

const BASE_META_OVERALL: [i32; 6] = [6, 6, 5, 8, 6, 6];
const BASE_META_DECISION: [&str; 6] = [
    "Accept as Poster",
    "Accept as Poster",
    "Accept as Poster",
    "Accept as Spotlight",
    "Accept as Poster",
    "Accept as Poster",
];
const MIXED_SWING: [i32; 6] = [2, -2, 2, -2, 2, -2];

#[derive(Clone, Copy, PartialEq)]
enum MetaPattern {
    Same,
    Upgrade,
    Drop,
    Mixed,
}

fn meta_pattern(aspect: PerturbationAspect, variant: &str) -> MetaPattern {
    use PerturbationAspect::*;
    match (aspect, variant) {
        (ReviewConclusion, _) => MetaPattern::Drop,
        (PaperSoundness, _) => MetaPattern::Upgrade,
        (RebuttalTone, "none") => MetaPattern::Mixed,
        (_, "none") => MetaPattern::Same,
        _ => MetaPattern::Upgrade,
    }
}

fn meta_scores(pattern: MetaPattern, index: usize) -> (i32, &'static str) {
    let base = BASE_META_OVERALL[index];
    match pattern {
        MetaPattern::Same => (base, BASE_META_DECISION[index]),
        MetaPattern::Upgrade => {
            let decision = match BASE_META_DECISION[index] {
                "Accept as Poster" => "Accept as Spotlight",
                _ => "Accept as Oral",
            };
            (base + 1, decision)
        }
        MetaPattern::Drop => (base - 3, "Reject"),
        MetaPattern::Mixed => {
            let overall = base + MIXED_SWING[index];
            let decision = match (BASE_META_DECISION[index], MIXED_SWING[index] > 0) {
                ("Accept as Poster", true) => "Accept as Spotlight",
                ("Accept as Poster", false) => "Reject",
                ("Accept as Spotlight", true) => "Accept as Oral",
                _ => "Accept as Poster",
            };
            (overall, decision)
        }
    }
}

fn reviewer_response(spec: &BundleSpec, index: usize, arm: &str) -> String {
    let mut c = BASE_REV_CONTRIBUTION[index];
    let mut s = BASE_REV_SOUNDNESS[index];
    let mut p = BASE_REV_PRESENTATION[index];
    let mut r = BASE_REV_RATING[index];
    match arm {
        "paper.soundness" => p -= 1,
        "paper.presentation" => r += MIXED_SWING[index],
        _ => {
            // baseline and paper.contribution read identical scores.
            let _ = (&mut c, &mut s);
        }
    }
    format!(
        "Summary:\nAn assessment of {topic} as presented in {id}.\n\n\
         Strengths:\nThe recipe is concrete and the writing flows well.\n\n\
         Weaknesses:\nCoverage is narrow and some choices lack justification.\n\n\
         Contribution: {c}\nSoundness: {s}\nPresentation: {p}\nRating: {r}\n",
        topic = spec.topic,
        id = spec.id,
    )
}

fn meta_response(spec: &BundleSpec, index: usize, variant: &str, arm: &str) -> String {
    let (overall, decision) = if arm == "baseline" {
        (BASE_META_OVERALL[index], BASE_META_DECISION[index])
    } else {
        let aspect: PerturbationAspect = arm.parse().unwrap();
        meta_scores(meta_pattern(aspect, variant), index)
    };
    let id = spec.id;
    match variant {
        "none" => format!("Overall Score: {overall}\nFinal Decision: {decision}\n"),
        "dimension" => format!(
            "Contribution: 3\nSoundness: 3\nPresentation: 3\nOverall Score: {overall}\nFinal Decision: {decision}\n"
        ),
        _ => format!(
            "Metareview:\nThe reviews and the rebuttal support a coherent overall assessment of {id}.\n\n\
             Justification For Why Not Higher Score:\nThe acknowledged contributions remain narrow in scope.\n\n\
             Justification For Why Not Lower Score:\nThe empirical recipe is sound and the revision addressed the main concerns.\n\n\
             Overall Score: {overall}\nFinal Decision: {decision}\n"
        ),
    }
}

/// Build the complete response script for the fixture corpus.
pub fn mock_script() -> BTreeMap<String, String> {
    let rules = TaxonomyRules::default_rules();
    let bundles = fixture_bundles();
    let mut script = BTreeMap::new();

    for (index, (spec, bundle)) in BUNDLES.iter().zip(&bundles).enumerate() {
        let id = spec.id;
        // Paper-aspect perturbation responses, one per targeted section.
        for aspect in [
            PerturbationAspect::PaperContribution,
            PerturbationAspect::PaperSoundness,
            PerturbationAspect::PaperPresentation,
        ] {
            let paper_aspect = aspect.paper_aspect().unwrap();
            let targets =
                taxonomy::select_target_sections(&bundle.paper, paper_aspect, &rules).unwrap();
            for section_index in targets {
                let title = bundle.paper.sections[section_index].title.as_str();
                script.insert(
                    format!("perturb/{aspect}/{id}/section{section_index}"),
                    paper_edit(aspect, title, spec),
                );
            }
        }
        // Review tone, rebuttal aspects, bucket.
        for review in &bundle.reviews {
            script.insert(
                format!("perturb/review.tone/{id}/{}", review.review_id),
                review_tone_edit(&review.review_id, spec),
            );
        }
        for rebuttal in &bundle.rebuttals {
            for aspect in [
                PerturbationAspect::RebuttalTone,
                PerturbationAspect::RebuttalPresentation,
                PerturbationAspect::RebuttalCompleteness,
            ] {
                script.insert(
                    format!("perturb/{aspect}/{id}/{}", rebuttal.review_id),
                    rebuttal_edit(aspect, &rebuttal.review_id, spec),
                );
            }
        }
        script.insert(format!("bucket/{id}"), bucket_response(spec));

        // Role responses.
        for arm in [
            "baseline",
            "paper.contribution",
            "paper.soundness",
            "paper.presentation",
        ] {
            script.insert(
                format!("review/{arm}/{id}"),
                reviewer_response(spec, index, arm),
            );
        }
        let mut arms: Vec<String> = vec!["baseline".to_string()];
        arms.extend(PerturbationAspect::ALL.iter().map(|a| a.to_string()));
        for arm in &arms {
            for variant in ["none", "dimension", "template"] {
                script.insert(
                    format!("meta/{variant}/{arm}/{id}"),
                    meta_response(spec, index, variant, arm),
                );
            }
        }
    }
    script
}

pub fn write_mock_script(path: &Path) {
    let script = serde_json::json!({
        "by_digest": {},
        "by_tag": mock_script(),
    });
    let mut text = serde_json::to_string_pretty(&script).unwrap();
    text.push('\n');
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}
