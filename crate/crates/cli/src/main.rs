//! Subcommand front-end for the review perturbation pipeline.
//!
//! Stage per subcommand (`perturb`, `review`, `metareview`, `analyze`,
//! `report`, ...) plus a composite `run`; every stage checkpoints its
//! artifacts so interrupted runs resume without repeating LLM calls.
//! Exit codes: 0 success, 1 pipeline error, 2 usage error.

mod config;
mod stages;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use review_perturb::corpus::SampleTargets;
use review_perturb::perturb::PerturbationAspect;
use review_perturb::roles::CotVariant;

use config::{ConfigFile, PipelineConfig, ProviderKind, ENV_API_KEY, ENV_BASE_URL, ENV_PROVIDER};

#[derive(Parser)]
#[command(
    name = "review-perturb",
    version,
    about = "Aspect-guided perturbation harness for LLM peer-review pipelines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the pipeline stages. Precedence: flags > config file >
/// environment > defaults; the resolved snapshot lands in the run manifest.
#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    /// Corpus directory (containing corpus.json) or the index file itself.
    #[arg(long, default_value = "corpus")]
    corpus: PathBuf,
    /// Output root for out/, runs/, analysis/, report/, cache/.
    #[arg(long, default_value = "work")]
    out: PathBuf,
    /// Perturbation aspect <mode>.<aspect>; repeatable. Default: all nine.
    #[arg(long = "aspect")]
    aspects: Vec<String>,
    /// Meta-review CoT variant (none|dimension|template); repeatable.
    #[arg(long = "cot")]
    cots: Vec<String>,
    /// Provider backend: openai-compatible | gemini | mock.
    #[arg(long)]
    provider: Option<String>,
    /// Model id passed to the provider.
    #[arg(long)]
    model: Option<String>,
    /// Response script for the mock provider.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Root seed; all pipeline randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for bundle-parallel stages.
    #[arg(long)]
    jobs: Option<usize>,
    /// Significance level for both test directions.
    #[arg(long)]
    alpha: Option<f64>,
    /// Equivalence margin for dimension scores.
    #[arg(long)]
    margin_dim: Option<f64>,
    /// Equivalence margin for overall scores.
    #[arg(long)]
    margin_overall: Option<f64>,
    /// Equivalence margin for mapped decisions.
    #[arg(long)]
    margin_decision: Option<f64>,
    /// Decision mapping scheme: simple | proportional.
    #[arg(long)]
    decision_mapping: Option<String>,
    /// Resume an existing run id (reuses its cache and artifacts).
    #[arg(long)]
    resume: Option<String>,
    /// Run id for a fresh run (default: time-derived).
    #[arg(long)]
    run_id: Option<String>,
    /// Response cache directory (default: <out>/cache).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Taxonomy rules file (default: built-in ruleset).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Config file (default: ./review-perturb.toml when present).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stratified-sample paper ids from a corpus index.
    Sample {
        /// Corpus index listing (paper_id, decision_category) pairs.
        #[arg(long)]
        pool: PathBuf,
        /// Per-category counts: poster,spotlight,oral.
        #[arg(long)]
        targets: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the sample (with its RNG provenance) as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the per-paper section relevance table and unmatched titles.
    ClassifySections {
        #[command(flatten)]
        args: PipelineArgs,
        /// Classify unmatched titles from body text via the LLM gateway.
        #[arg(long)]
        classify_bodies: bool,
    },
    /// Apply perturbation aspects and write perturbed bundles.
    Perturb {
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Run LLM-as-Reviewer over one arm (baseline or a perturbed aspect).
    Review {
        #[command(flatten)]
        args: PipelineArgs,
        /// "baseline" or an aspect string like paper.soundness.
        #[arg(long, default_value = stages::BASELINE_ARM)]
        arm: String,
    },
    /// Run LLM-as-Meta-Reviewer over one arm for each CoT variant.
    Metareview {
        #[command(flatten)]
        args: PipelineArgs,
        #[arg(long, default_value = stages::BASELINE_ARM)]
        arm: String,
    },
    /// Pair runs and compute directional/invariance statistics.
    Analyze {
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Aggregate analysis artifacts into tables, figures, and summary.json.
    Report {
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Emit the seeded manual-evaluation manifest (blank verdict column).
    EvalManifest {
        #[command(flatten)]
        args: PipelineArgs,
        /// Edit samples per evaluated aspect.
        #[arg(long, default_value_t = 100)]
        per_aspect: usize,
        /// False-claim samples across all buckets.
        #[arg(long, default_value_t = 400)]
        claim_sample: usize,
    },
    /// Summarize applied-edit counts per aspect.
    PerturbStats {
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Full pipeline: perturb, review, metareview, analyze, report.
    Run {
        #[command(flatten)]
        args: PipelineArgs,
    },
}

fn parse_targets(text: &str) -> Result<SampleTargets, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "--targets expects poster,spotlight,oral counts, got {text:?}"
        ));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad target count {s:?}"))
    };
    Ok(SampleTargets {
        poster: parse(parts[0])?,
        spotlight: parse(parts[1])?,
        oral: parse(parts[2])?,
    })
}

fn default_run_id() -> String {
    let ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    format!("run-{ms}")
}

fn resolve(args: &PipelineArgs) -> Result<PipelineConfig, String> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => {
            let default = PathBuf::from("review-perturb.toml");
            if default.is_file() {
                ConfigFile::load(&default)?
            } else {
                ConfigFile::default()
            }
        }
    };
    let env = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());

    let provider_name = args
        .provider
        .clone()
        .or(file.provider.provider.clone())
        .or_else(|| env(ENV_PROVIDER))
        .unwrap_or_else(|| "mock".to_string());
    let provider: ProviderKind = provider_name.parse()?;

    let aspects: Vec<PerturbationAspect> = if args.aspects.is_empty() {
        PerturbationAspect::ALL.to_vec()
    } else {
        args.aspects
            .iter()
            .map(|a| a.parse())
            .collect::<Result<_, _>>()?
    };
    let variants: Vec<CotVariant> = if args.cots.is_empty() {
        CotVariant::ALL.to_vec()
    } else {
        args.cots
            .iter()
            .map(|v| {
                CotVariant::parse(v)
                    .ok_or_else(|| format!("unknown CoT variant {v:?} (none|dimension|template)"))
            })
            .collect::<Result<_, _>>()?
    };

    let (run_id, resumed) = match (&args.resume, &args.run_id) {
        (Some(id), _) => (id.clone(), true),
        (None, Some(id)) => (id.clone(), false),
        (None, None) => (default_run_id(), false),
    };

    let base_url = env(ENV_BASE_URL)
        .or(file.provider.base_url.clone())
        .unwrap_or_else(|| match provider {
            ProviderKind::Gemini => "https://generativelanguage.googleapis.com".to_string(),
            _ => "https://api.openai.com/v1".to_string(),
        });

    let jobs = args.jobs.or(file.run.jobs).unwrap_or(4);
    Ok(PipelineConfig {
        corpus: args.corpus.clone(),
        out_root: args.out.clone(),
        run_id,
        resumed,
        aspects,
        variants,
        provider,
        model_id: args
            .model
            .clone()
            .or(file.provider.model)
            .unwrap_or_else(|| "mock-model".to_string()),
        api_key: env(ENV_API_KEY)
            .or(file.provider.api_key)
            .unwrap_or_default(),
        base_url,
        mock_script: args.mock_script.clone().or(file.provider.mock_script),
        cache_dir: args
            .cache_dir
            .clone()
            .unwrap_or_else(|| args.out.join("cache")),
        rules_file: args.rules.clone(),
        seed: args.seed.or(file.run.seed).unwrap_or(0),
        jobs,
        alpha: args.alpha.or(file.analysis.alpha).unwrap_or(0.05),
        margin_dim: args.margin_dim.or(file.analysis.margin_dim).unwrap_or(0.5),
        margin_overall: args
            .margin_overall
            .or(file.analysis.margin_overall)
            .unwrap_or(1.0),
        margin_decision: args
            .margin_decision
            .or(file.analysis.margin_decision)
            .unwrap_or(0.5),
        decision_mapping: args
            .decision_mapping
            .clone()
            .or(file.analysis.decision_mapping)
            .unwrap_or_else(|| "simple".to_string()),
        perturb_retries: file.perturb.retries.unwrap_or(1),
        perturb_temperature: file.perturb.temperature.unwrap_or(0.0),
        temperature_overrides: file
            .perturb
            .temperature_overrides
            .into_iter()
            .collect::<BTreeMap<String, f64>>(),
        max_retries: file.limits.max_retries.unwrap_or(2),
        requests_per_minute: file.limits.requests_per_minute.unwrap_or(0),
        max_in_flight: file.limits.max_in_flight.unwrap_or(jobs.max(1)),
        max_output_tokens: file.limits.max_output_tokens.unwrap_or(4096),
        max_paper_chars: file.limits.max_paper_chars,
    })
}

fn dispatch(command: Command) -> Result<(), String> {
    match command {
        Command::Sample {
            pool,
            targets,
            seed,
            out,
        } => {
            let targets = parse_targets(&targets)?;
            let ids = stages::run_sample(&pool, &targets, seed, out.as_deref())?;
            if out.is_none() {
                for id in &ids {
                    println!("{id}");
                }
            } else {
                println!("sampled {} ids", ids.len());
            }
            Ok(())
        }
        Command::ClassifySections {
            args,
            classify_bodies,
        } => {
            let cfg = resolve(&args)?;
            let gateway = if classify_bodies {
                Some(cfg.build_gateway()?)
            } else {
                None
            };
            let table = stages::run_classify_sections(&cfg, gateway.as_ref())?;
            print!("{table}");
            Ok(())
        }
        Command::Perturb { args } => {
            let cfg = resolve(&args)?;
            let gateway = cfg.build_gateway()?;
            stages::stage_perturb(&cfg, &gateway)?;
            stages::write_manifest(&cfg, &gateway)
        }
        Command::Review { args, arm } => {
            let cfg = resolve(&args)?;
            let gateway = cfg.build_gateway()?;
            stages::stage_reviewer(&cfg, &gateway, &arm)?;
            stages::write_manifest(&cfg, &gateway)
        }
        Command::Metareview { args, arm } => {
            let cfg = resolve(&args)?;
            let gateway = cfg.build_gateway()?;
            stages::stage_meta(&cfg, &gateway, &arm)?;
            stages::write_manifest(&cfg, &gateway)
        }
        Command::Analyze { args } => {
            let cfg = resolve(&args)?;
            stages::stage_analyze(&cfg)
        }
        Command::Report { args } => {
            let cfg = resolve(&args)?;
            stages::stage_report(&cfg)
        }
        Command::EvalManifest {
            args,
            per_aspect,
            claim_sample,
        } => {
            let cfg = resolve(&args)?;
            let path = stages::stage_eval_manifest(&cfg, per_aspect, claim_sample)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::PerturbStats { args } => {
            let cfg = resolve(&args)?;
            let table = stages::stage_perturb_stats(&cfg)?;
            print!("{table}");
            Ok(())
        }
        Command::Run { args } => {
            let cfg = resolve(&args)?;
            stages::run_all(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            let code = match error.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = error.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
