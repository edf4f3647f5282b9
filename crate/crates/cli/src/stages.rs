//! Pipeline stages. Each stage reads and writes checkpoint artifacts under
//! the output root, so a failed run resumes from its last completed stage
//! without repeating paid LLM calls:
//!
//! ```text
//! <root>/out/<aspect>/<bundle_id>/   perturbed bundles + perturbation_log.json
//! <root>/buckets/<bundle_id>.json    false claim buckets
//! <root>/runs/<run_id>/<arm>/        role outputs + manifest.json
//! <root>/analysis/                   per-(aspect, variant) statistics
//! <root>/report/                     tables, figures, summary.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use review_perturb::corpus::{self, Bundle, CorpusIndex};
use review_perturb::llmgate::{DigestEntry, Gateway, RunManifest};
use review_perturb::perturb::{
    self, FalseClaimBucket, PerturbConfig, PerturbError, PerturbationAspect, PerturbationLog,
};
use review_perturb::report::{
    build_report, AnalysisArtifact, DecisionStats, MetricAnalysis, REVIEWER_METRICS,
    REVIEWER_VARIANT,
};
use review_perturb::roles::{
    self, CotVariant, FinalDecision, MetaReviewerOutput, ReviewerOutput, RoleError, RoleOptions,
};
use review_perturb::stats::{
    acceptance_rate_delta, classify_outcome, cohen_kappa, decision_distribution_delta,
    map_decision, mean_delta, pair_runs, transition_matrix, DecisionMapping,
};
use review_perturb::taxonomy;

use crate::config::PipelineConfig;

pub const BASELINE_ARM: &str = "baseline";

fn fail(context: &str, error: impl std::fmt::Display) -> String {
    format!("{context}: {error}")
}

/// Corpus index path: `--corpus` may name the directory or the index file.
fn corpus_paths(cfg: &PipelineConfig) -> (PathBuf, PathBuf) {
    if cfg.corpus.extension().is_some_and(|e| e == "json") {
        let root = cfg.corpus.parent().unwrap_or(Path::new(".")).to_path_buf();
        (root, cfg.corpus.clone())
    } else {
        (cfg.corpus.clone(), cfg.corpus.join("corpus.json"))
    }
}

pub fn load_corpus(cfg: &PipelineConfig) -> Result<(CorpusIndex, Vec<Bundle>), String> {
    let (root, index_path) = corpus_paths(cfg);
    let index = CorpusIndex::load(&index_path).map_err(|e| fail("loading corpus index", e))?;
    let bundles = index
        .load_bundles(&root)
        .map_err(|e| fail("loading bundles", e))?;
    Ok((index, bundles))
}

/// Load the perturbed variant of the corpus for one aspect; bundles whose
/// perturbation failed are absent and simply skipped.
fn load_perturbed(cfg: &PipelineConfig, aspect: PerturbationAspect) -> Result<Vec<Bundle>, String> {
    let (_, index_path) = corpus_paths(cfg);
    let index = CorpusIndex::load(&index_path).map_err(|e| fail("loading corpus index", e))?;
    let root = cfg.perturbed_dir(aspect);
    let mut bundles = Vec::new();
    for entry in &index.bundles {
        let dir = root.join(&entry.dir);
        if !dir.is_dir() {
            continue;
        }
        let bundle =
            corpus::load_bundle_with_meta(&dir, Some(&entry.paper_id), entry.decision_category)
                .map_err(|e| fail("loading perturbed bundle", e))?;
        bundles.push(bundle);
    }
    Ok(bundles)
}

/// Run `work` over items on a fixed-size worker pool. Output order never
/// depends on scheduling: results are collected keyed by item index.
fn parallel_map<T, R, F>(items: &[T], jobs: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(items.len().max(1)) {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::SeqCst);
                if index >= items.len() {
                    break;
                }
                let result = work(&items[index]);
                results.lock().unwrap()[index] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}

// ---------------------------------------------------------------------------
// Perturb
// ---------------------------------------------------------------------------

pub fn stage_perturb(cfg: &PipelineConfig, gateway: &Gateway) -> Result<(), String> {
    let (_, bundles) = load_corpus(cfg)?;
    let rules = cfg.taxonomy_rules()?;
    let mut perturb_config = PerturbConfig::new(&cfg.model_id, cfg.seed);
    perturb_config.temperature = cfg.perturb_temperature;
    perturb_config.temperature_overrides = cfg.temperature_overrides.clone();
    perturb_config.retries = cfg.perturb_retries;
    perturb_config.max_output_tokens = cfg.max_output_tokens;

    for aspect in &cfg.aspects {
        let aspect = *aspect;
        let out_dir = cfg.perturbed_dir(aspect);
        fs::create_dir_all(&out_dir).map_err(|e| fail("creating output dir", e))?;
        let results = parallel_map(&bundles, cfg.jobs, |bundle| {
            perturb::perturb_bundle(bundle, aspect, gateway, &rules, &perturb_config)
                .map(|ok| (bundle.bundle_id().to_string(), ok))
                .map_err(|e| (bundle.bundle_id().to_string(), e))
        });
        for result in results {
            match result {
                Ok((bundle_id, (perturbed, log, bucket))) => {
                    let dir = out_dir.join(&bundle_id);
                    corpus::save_bundle(&dir, &perturbed)
                        .map_err(|e| fail("writing perturbed bundle", e))?;
                    write_log(&dir, &log)?;
                    if let Some(bucket) = bucket {
                        let bucket_dir = cfg.buckets_dir();
                        fs::create_dir_all(&bucket_dir)
                            .map_err(|e| fail("creating buckets dir", e))?;
                        corpus::write_json(&bucket_dir.join(format!("{bundle_id}.json")), &bucket)
                            .map_err(|e| fail("writing bucket", e))?;
                    }
                }
                Err((bundle_id, PerturbError::AllEditsFailed { log, .. })) => {
                    // Excluded from paired analysis; keep the log for audit.
                    log::warn!("{aspect}: no edit applied for {bundle_id}; bundle excluded");
                    let dir = out_dir.join(format!("{bundle_id}.failed"));
                    fs::create_dir_all(&dir).map_err(|e| fail("creating failure dir", e))?;
                    write_log(&dir, &log)?;
                }
                Err((bundle_id, error)) => {
                    return Err(fail(&format!("perturbing {bundle_id} ({aspect})"), error));
                }
            }
        }
    }
    Ok(())
}

fn write_log(dir: &Path, log: &PerturbationLog) -> Result<(), String> {
    corpus::write_json(&dir.join("perturbation_log.json"), log)
        .map_err(|e| fail("writing perturbation log", e))
}

fn read_logs(cfg: &PipelineConfig) -> Result<Vec<PerturbationLog>, String> {
    let out_dir = cfg.out_root.join("out");
    let mut logs = Vec::new();
    if !out_dir.is_dir() {
        return Ok(logs);
    }
    let mut aspect_dirs: Vec<PathBuf> = fs::read_dir(&out_dir)
        .map_err(|e| fail("reading out dir", e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    aspect_dirs.sort();
    for aspect_dir in aspect_dirs {
        let mut bundle_dirs: Vec<PathBuf> = fs::read_dir(&aspect_dir)
            .map_err(|e| fail("reading aspect dir", e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        bundle_dirs.sort();
        for bundle_dir in bundle_dirs {
            let log_path = bundle_dir.join("perturbation_log.json");
            if log_path.is_file() {
                let text = fs::read_to_string(&log_path).map_err(|e| fail("reading log", e))?;
                logs.push(serde_json::from_str(&text).map_err(|e| fail("parsing log", e))?);
            }
        }
    }
    Ok(logs)
}

fn read_buckets(cfg: &PipelineConfig) -> Result<Vec<FalseClaimBucket>, String> {
    let dir = cfg.buckets_dir();
    let mut buckets = Vec::new();
    if !dir.is_dir() {
        return Ok(buckets);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| fail("reading buckets dir", e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|e| fail("reading bucket", e))?;
        buckets.push(serde_json::from_str(&text).map_err(|e| fail("parsing bucket", e))?);
    }
    Ok(buckets)
}

// ---------------------------------------------------------------------------
// Roles
// ---------------------------------------------------------------------------

fn arm_bundles(cfg: &PipelineConfig, arm: &str) -> Result<Vec<Bundle>, String> {
    if arm == BASELINE_ARM {
        Ok(load_corpus(cfg)?.1)
    } else {
        let aspect: PerturbationAspect = arm.parse()?;
        load_perturbed(cfg, aspect)
    }
}

fn role_options(cfg: &PipelineConfig, tag: String) -> RoleOptions {
    RoleOptions {
        model_id: cfg.model_id.clone(),
        temperature: 0.0,
        max_output_tokens: cfg.max_output_tokens,
        max_paper_chars: cfg.max_paper_chars,
        allow_truncated: false,
        request_tag: tag,
    }
}

/// LLM-as-Reviewer over one arm. Parse failures drop the bundle from the
/// arm (logged); provider failures abort.
pub fn stage_reviewer(cfg: &PipelineConfig, gateway: &Gateway, arm: &str) -> Result<(), String> {
    let bundles = arm_bundles(cfg, arm)?;
    let dir = cfg.arm_dir(arm);
    fs::create_dir_all(&dir).map_err(|e| fail("creating arm dir", e))?;
    let results = parallel_map(&bundles, cfg.jobs, |bundle| {
        let tag = format!("review/{arm}/{}", bundle.bundle_id());
        let options = role_options(cfg, tag);
        (
            bundle.bundle_id().to_string(),
            roles::run_reviewer(&bundle.paper, gateway, &options),
        )
    });
    for (bundle_id, result) in results {
        match result {
            Ok(output) => {
                corpus::write_json(
                    &dir.join(format!("{bundle_id}.reviewer.default.json")),
                    &output,
                )
                .map_err(|e| fail("writing reviewer output", e))?;
            }
            Err(RoleError::ParseError { issues }) => {
                log::warn!("reviewer/{arm}/{bundle_id} dropped from pairing: {issues}");
            }
            Err(error) => return Err(fail(&format!("reviewer {arm}/{bundle_id}"), error)),
        }
    }
    Ok(())
}

/// LLM-as-Meta-Reviewer over one arm, for every configured CoT variant.
pub fn stage_meta(cfg: &PipelineConfig, gateway: &Gateway, arm: &str) -> Result<(), String> {
    let bundles = arm_bundles(cfg, arm)?;
    let dir = cfg.arm_dir(arm);
    fs::create_dir_all(&dir).map_err(|e| fail("creating arm dir", e))?;
    for variant in &cfg.variants {
        let variant = *variant;
        let results = parallel_map(&bundles, cfg.jobs, |bundle| {
            let tag = format!("meta/{variant}/{arm}/{}", bundle.bundle_id());
            let options = role_options(cfg, tag);
            (
                bundle.bundle_id().to_string(),
                roles::run_meta_reviewer(bundle, variant, gateway, &options),
            )
        });
        for (bundle_id, result) in results {
            match result {
                Ok(output) => {
                    corpus::write_json(
                        &dir.join(format!("{bundle_id}.meta.{variant}.json")),
                        &output,
                    )
                    .map_err(|e| fail("writing meta output", e))?;
                }
                Err(RoleError::ParseError { issues }) => {
                    log::warn!("meta/{variant}/{arm}/{bundle_id} dropped from pairing: {issues}");
                }
                Err(error) => {
                    return Err(fail(&format!("meta {variant}/{arm}/{bundle_id}"), error))
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Analyze
// ---------------------------------------------------------------------------

fn read_outputs<T: serde::de::DeserializeOwned>(
    dir: &Path,
    suffix: &str,
) -> Result<BTreeMap<String, T>, String> {
    let mut outputs = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(outputs);
    }
    for entry in fs::read_dir(dir).map_err(|e| fail("reading run dir", e))? {
        let path = entry.map_err(|e| fail("reading run dir", e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(bundle_id) = name.strip_suffix(suffix) {
            let text = fs::read_to_string(&path).map_err(|e| fail("reading output", e))?;
            let output = serde_json::from_str(&text).map_err(|e| fail("parsing output", e))?;
            outputs.insert(bundle_id.to_string(), output);
        }
    }
    Ok(outputs)
}

fn reviewer_metric(output: &ReviewerOutput, metric: &str) -> f64 {
    match metric {
        "contribution_score" => output.contribution_score as f64,
        "soundness_score" => output.soundness_score as f64,
        "presentation_score" => output.presentation_score as f64,
        "overall_rating" => output.overall_rating as f64,
        other => unreachable!("unknown reviewer metric {other}"),
    }
}

fn analyze_metric(
    metric: &str,
    baseline: &BTreeMap<String, f64>,
    perturbed: &BTreeMap<String, f64>,
    margin: f64,
    alpha: f64,
) -> Result<MetricAnalysis, String> {
    let (samples, excluded) =
        pair_runs(metric, baseline, perturbed).map_err(|e| fail(metric, e))?;
    let verdict = classify_outcome(&samples, margin, alpha);
    Ok(MetricAnalysis {
        metric: metric.to_string(),
        margin,
        n: samples.len(),
        mean_delta: mean_delta(&samples).map_err(|e| fail(metric, e))?,
        verdict,
        excluded,
        pairs: samples.pairs,
    })
}

fn reviewer_artifact(
    cfg: &PipelineConfig,
    aspect: PerturbationAspect,
) -> Result<Option<AnalysisArtifact>, String> {
    let suffix = ".reviewer.default.json";
    let baseline: BTreeMap<String, ReviewerOutput> =
        read_outputs(&cfg.arm_dir(BASELINE_ARM), suffix)?;
    let perturbed: BTreeMap<String, ReviewerOutput> =
        read_outputs(&cfg.arm_dir(&aspect.to_string()), suffix)?;
    if baseline.is_empty() || perturbed.is_empty() {
        return Ok(None);
    }

    let mut metrics = BTreeMap::new();
    let mut excluded_bundles: Vec<String> = Vec::new();
    for metric in REVIEWER_METRICS {
        let margin = if metric == "overall_rating" {
            cfg.margin_overall
        } else {
            cfg.margin_dim
        };
        let base: BTreeMap<String, f64> = baseline
            .iter()
            .map(|(id, o)| (id.clone(), reviewer_metric(o, metric)))
            .collect();
        let pert: BTreeMap<String, f64> = perturbed
            .iter()
            .map(|(id, o)| (id.clone(), reviewer_metric(o, metric)))
            .collect();
        let analysis = analyze_metric(metric, &base, &pert, margin, cfg.alpha)?;
        excluded_bundles = analysis.excluded.clone();
        metrics.insert(metric.to_string(), analysis);
    }
    Ok(Some(AnalysisArtifact {
        schema_version: 1,
        aspect,
        variant: REVIEWER_VARIANT.to_string(),
        alpha: cfg.alpha,
        metrics,
        decision_stats: None,
        excluded_bundles,
    }))
}

fn meta_artifact(
    cfg: &PipelineConfig,
    aspect: PerturbationAspect,
    variant: CotVariant,
) -> Result<Option<AnalysisArtifact>, String> {
    let suffix = format!(".meta.{variant}.json");
    let baseline: BTreeMap<String, MetaReviewerOutput> =
        read_outputs(&cfg.arm_dir(BASELINE_ARM), &suffix)?;
    let perturbed: BTreeMap<String, MetaReviewerOutput> =
        read_outputs(&cfg.arm_dir(&aspect.to_string()), &suffix)?;
    if baseline.is_empty() || perturbed.is_empty() {
        return Ok(None);
    }

    let scheme = match cfg.decision_scheme() {
        DecisionMapping::Simple => DecisionMapping::Simple,
        DecisionMapping::Proportional { .. } => {
            // Weights come from the baseline run's decision frequencies.
            let decisions: Vec<FinalDecision> =
                baseline.values().map(|o| o.final_decision).collect();
            DecisionMapping::proportional_from_baseline(&decisions)
        }
    };

    let overall_base: BTreeMap<String, f64> = baseline
        .iter()
        .map(|(id, o)| (id.clone(), o.overall_score as f64))
        .collect();
    let overall_pert: BTreeMap<String, f64> = perturbed
        .iter()
        .map(|(id, o)| (id.clone(), o.overall_score as f64))
        .collect();
    let decision_base: BTreeMap<String, f64> = baseline
        .iter()
        .map(|(id, o)| (id.clone(), map_decision(o.final_decision, &scheme)))
        .collect();
    let decision_pert: BTreeMap<String, f64> = perturbed
        .iter()
        .map(|(id, o)| (id.clone(), map_decision(o.final_decision, &scheme)))
        .collect();

    let mut metrics = BTreeMap::new();
    let overall = analyze_metric(
        "overall_score",
        &overall_base,
        &overall_pert,
        cfg.margin_overall,
        cfg.alpha,
    )?;
    let excluded_bundles = overall.excluded.clone();
    metrics.insert("overall_score".to_string(), overall);
    metrics.insert(
        "final_decision".to_string(),
        analyze_metric(
            "final_decision",
            &decision_base,
            &decision_pert,
            cfg.margin_decision,
            cfg.alpha,
        )?,
    );

    // Decision summaries over the paired bundles only.
    let paired_ids: Vec<&String> = baseline
        .keys()
        .filter(|id| perturbed.contains_key(*id))
        .collect();
    let before: Vec<FinalDecision> = paired_ids
        .iter()
        .map(|id| baseline[*id].final_decision)
        .collect();
    let after: Vec<FinalDecision> = paired_ids
        .iter()
        .map(|id| perturbed[*id].final_decision)
        .collect();
    let order = FinalDecision::ORDER.to_vec();
    let decision_stats = DecisionStats {
        mapping: scheme,
        kappa: cohen_kappa(&before, &after).map_err(|e| fail("kappa", e))?,
        transition_counts: transition_matrix(&before, &after, &order)
            .map_err(|e| fail("transition", e))?,
        transition_order: order.clone(),
        acceptance_rate_delta_pct: acceptance_rate_delta(&before, &after)
            .map_err(|e| fail("acceptance delta", e))?,
        distribution_delta_pct: order
            .iter()
            .copied()
            .zip(
                decision_distribution_delta(&before, &after, &order)
                    .map_err(|e| fail("distribution delta", e))?,
            )
            .collect(),
    };

    Ok(Some(AnalysisArtifact {
        schema_version: 1,
        aspect,
        variant: variant.to_string(),
        alpha: cfg.alpha,
        metrics,
        decision_stats: Some(decision_stats),
        excluded_bundles,
    }))
}

pub fn stage_analyze(cfg: &PipelineConfig) -> Result<(), String> {
    let analysis_dir = cfg.analysis_dir();
    for aspect in &cfg.aspects {
        let aspect = *aspect;
        if aspect.mode() == review_perturb::perturb::Mode::Paper {
            if let Some(artifact) = reviewer_artifact(cfg, aspect)? {
                artifact
                    .save(&analysis_dir)
                    .map_err(|e| fail("writing analysis", e))?;
            }
        }
        for variant in &cfg.variants {
            if let Some(artifact) = meta_artifact(cfg, aspect, *variant)? {
                artifact
                    .save(&analysis_dir)
                    .map_err(|e| fail("writing analysis", e))?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

pub fn stage_report(cfg: &PipelineConfig) -> Result<(), String> {
    let analysis_dir = cfg.analysis_dir();
    let mut artifacts = Vec::new();
    for aspect in &cfg.aspects {
        let mut wanted: Vec<String> = cfg.variants.iter().map(|v| v.to_string()).collect();
        if aspect.mode() == review_perturb::perturb::Mode::Paper {
            wanted.push(REVIEWER_VARIANT.to_string());
        }
        for variant in wanted {
            let path = analysis_dir.join(format!("{aspect}.{variant}.json"));
            if !path.is_file() {
                return Err(format!("missing analysis for {aspect}.{variant}"));
            }
            artifacts.push(AnalysisArtifact::load(&path).map_err(|e| fail("loading analysis", e))?);
        }
    }
    let manifest = read_manifest(cfg)?.ok_or("missing run manifest (run the pipeline first)")?;
    build_report(&artifacts, &manifest, &cfg.report_dir()).map_err(|e| fail("building report", e))
}

// ---------------------------------------------------------------------------
// Accounting commands
// ---------------------------------------------------------------------------

pub fn stage_eval_manifest(
    cfg: &PipelineConfig,
    per_aspect: usize,
    claim_sample: usize,
) -> Result<PathBuf, String> {
    let logs = read_logs(cfg)?;
    let buckets = read_buckets(cfg)?;
    let manifest =
        perturb::sample_for_manual_eval(&logs, &buckets, per_aspect, claim_sample, cfg.seed)
            .map_err(|e| fail("sampling for manual eval", e))?;
    let eval_dir = cfg.out_root.join("eval");
    fs::create_dir_all(&eval_dir).map_err(|e| fail("creating eval dir", e))?;
    let path = eval_dir.join("manual_eval_manifest.csv");
    manifest.write_csv(&path)?;
    Ok(path)
}

pub fn stage_perturb_stats(cfg: &PipelineConfig) -> Result<String, String> {
    let logs = read_logs(cfg)?;
    let stats = perturb::summarize_perturbations(&logs);
    let mut csv = String::from("mode,aspect,bundles,sum,mean,min,max\n");
    let mut table = format!(
        "{:<10} {:<14} {:>7} {:>8} {:>8} {:>5} {:>5}\n",
        "mode", "aspect", "bundles", "sum", "mean", "min", "max"
    );
    for (aspect, s) in &stats {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            aspect.mode(),
            aspect.aspect_name(),
            s.bundles,
            s.sum,
            s.mean,
            s.min,
            s.max
        ));
        table.push_str(&format!(
            "{:<10} {:<14} {:>7} {:>8} {:>8.2} {:>5} {:>5}\n",
            aspect.mode().to_string(),
            aspect.aspect_name(),
            s.bundles,
            s.sum,
            s.mean,
            s.min,
            s.max
        ));
    }
    let path = cfg.out_root.join("perturb_stats.csv");
    fs::create_dir_all(&cfg.out_root).map_err(|e| fail("creating out root", e))?;
    fs::write(&path, csv).map_err(|e| fail("writing perturb stats", e))?;
    Ok(table)
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

fn read_manifest(cfg: &PipelineConfig) -> Result<Option<RunManifest>, String> {
    let path = cfg.manifest_path();
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| fail("reading manifest", e))?;
    Ok(Some(
        serde_json::from_str(&text).map_err(|e| fail("parsing manifest", e))?,
    ))
}

/// Write the run manifest: resolved config snapshot, seeds, and the digest of
/// every request/response pair seen by this invocation's gateway (merged with
/// any previous invocation of the same run id).
pub fn write_manifest(cfg: &PipelineConfig, gateway: &Gateway) -> Result<(), String> {
    let mut digests: Vec<DigestEntry> = gateway.digest_entries();
    if let Some(previous) = read_manifest(cfg)? {
        digests.extend(previous.request_digests);
        digests.sort();
        digests.dedup();
    }
    let manifest = RunManifest {
        schema_version: 1,
        run_id: cfg.run_id.clone(),
        created_unix_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
        rng_algorithm: review_perturb::rng::RNG_ALGORITHM.to_string(),
        seed: cfg.seed,
        model_ids: vec![cfg.model_id.clone()],
        config: serde_json::to_value(cfg).map_err(|e| fail("serializing config", e))?,
        stats: gateway.stats(),
        request_digests: digests,
    };
    fs::create_dir_all(cfg.run_dir()).map_err(|e| fail("creating run dir", e))?;
    corpus::write_json(&cfg.manifest_path(), &manifest).map_err(|e| fail("writing manifest", e))
}

// ---------------------------------------------------------------------------
// Composite run
// ---------------------------------------------------------------------------

pub fn run_all(cfg: &PipelineConfig) -> Result<(), String> {
    let gateway = cfg.build_gateway()?;
    let has_paper_aspect = cfg
        .aspects
        .iter()
        .any(|a| a.mode() == review_perturb::perturb::Mode::Paper);

    stage_perturb(cfg, &gateway)?;

    if has_paper_aspect {
        stage_reviewer(cfg, &gateway, BASELINE_ARM)?;
    }
    stage_meta(cfg, &gateway, BASELINE_ARM)?;
    for aspect in &cfg.aspects {
        let arm = aspect.to_string();
        if aspect.mode() == review_perturb::perturb::Mode::Paper {
            stage_reviewer(cfg, &gateway, &arm)?;
        }
        stage_meta(cfg, &gateway, &arm)?;
    }

    stage_analyze(cfg)?;
    write_manifest(cfg, &gateway)?;
    stage_report(cfg)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sample and classify commands
// ---------------------------------------------------------------------------

pub fn run_sample(
    pool_path: &Path,
    targets: &corpus::SampleTargets,
    seed: u64,
    out: Option<&Path>,
) -> Result<Vec<String>, String> {
    let index = CorpusIndex::load(pool_path).map_err(|e| fail("loading pool", e))?;
    let ids =
        corpus::stratified_sample(&index.pool(), targets, seed).map_err(|e| fail("sampling", e))?;
    if let Some(out) = out {
        let payload = serde_json::json!({
            "schema_version": 1,
            "rng_algorithm": review_perturb::rng::RNG_ALGORITHM,
            "seed": seed,
            "targets": targets,
            "ids": ids,
        });
        let mut text = serde_json::to_string_pretty(&payload).map_err(|e| e.to_string())?;
        text.push('\n');
        fs::write(out, text).map_err(|e| fail("writing sample", e))?;
    }
    Ok(ids)
}

/// Per-paper relevance table plus the unmatched-title warning list. With a
/// gateway, unmatched titles are classified from body text instead.
pub fn run_classify_sections(
    cfg: &PipelineConfig,
    gateway: Option<&Gateway>,
) -> Result<String, String> {
    let (_, bundles) = load_corpus(cfg)?;
    let rules = cfg.taxonomy_rules()?;
    let mut out = String::new();
    let mut warnings: Vec<String> = Vec::new();
    out.push_str(&format!(
        "{:<10} {:<34} {:>12} {:>10}\n",
        "paper", "section", "contribution", "soundness"
    ));
    for bundle in &bundles {
        for section in &bundle.paper.sections {
            let (mut relevance, matched) =
                taxonomy::classify_section_matched(&section.title, &rules);
            let mut origin = "";
            if !matched {
                if let Some(gateway) = gateway {
                    relevance = classify_body(cfg, gateway, &rules, bundle, section)?;
                    origin = " (body)";
                } else {
                    warnings.push(format!("{}: {}", bundle.bundle_id(), section.title));
                }
            }
            out.push_str(&format!(
                "{:<10} {:<34} {:>12} {:>10}{origin}\n",
                bundle.bundle_id(),
                section.title.chars().take(34).collect::<String>(),
                relevance.contribution,
                relevance.soundness
            ));
        }
    }
    if !warnings.is_empty() {
        out.push_str("\nunmatched titles (no rule applied; defaulted to none):\n");
        for warning in &warnings {
            out.push_str(&format!("  {warning}\n"));
        }
    }
    Ok(out)
}

fn classify_body(
    cfg: &PipelineConfig,
    gateway: &Gateway,
    rules: &taxonomy::TaxonomyRules,
    bundle: &Bundle,
    section: &review_perturb::corpus::Section,
) -> Result<taxonomy::SectionRelevance, String> {
    let prompt = rules
        .body_classifier_prompt
        .replace("[Section Title here]", &section.title)
        .replace("[Section Body here]", section.body_text());
    let request = review_perturb::llmgate::LlmRequest {
        model_id: cfg.model_id.clone(),
        system_prompt: None,
        user_prompt: prompt,
        max_output_tokens: 64,
        temperature: 0.0,
        request_tag: format!("classify/{}/{}", bundle.bundle_id(), section.title),
    };
    let response = gateway.complete(&request).map_err(|e| e.to_string())?;
    let answer = response.text.to_lowercase();
    let flag = |label: &str| {
        answer
            .lines()
            .find(|l| l.trim_start().starts_with(label))
            .is_some_and(|l| l.contains("yes"))
    };
    Ok(taxonomy::SectionRelevance {
        contribution: flag("contribution"),
        soundness: flag("soundness"),
    })
}
