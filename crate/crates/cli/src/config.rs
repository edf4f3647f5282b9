//! Resolved pipeline configuration.
//!
//! Precedence: command-line flags > config file > environment > defaults.
//! The post-resolution snapshot is serialized verbatim into the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use review_perturb::llmgate::{
    Gateway, GeminiProvider, MockProvider, MockScript, OpenAiProvider, Provider, ResponseCache,
    RetryPolicy,
};
use review_perturb::perturb::PerturbationAspect;
use review_perturb::roles::CotVariant;
use review_perturb::stats::DecisionMapping;
use review_perturb::taxonomy::TaxonomyRules;

pub const ENV_PROVIDER: &str = "RP_PROVIDER";
pub const ENV_API_KEY: &str = "RP_API_KEY";
pub const ENV_BASE_URL: &str = "RP_BASE_URL";

/// Keys accepted in a `review-perturb.toml` config file. Every field is
/// optional; unset fields fall through to environment or defaults.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ConfigFile {
    #[serde(default)]
    pub provider: ProviderSection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub perturb: PerturbSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ProviderSection {
    pub provider: Option<String>,
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub api_key: Option<String>,
    pub mock_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct LimitsSection {
    pub max_retries: Option<u32>,
    pub requests_per_minute: Option<u32>,
    pub max_in_flight: Option<usize>,
    pub max_output_tokens: Option<u32>,
    pub max_paper_chars: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct AnalysisSection {
    pub alpha: Option<f64>,
    pub margin_dim: Option<f64>,
    pub margin_overall: Option<f64>,
    pub margin_decision: Option<f64>,
    pub decision_mapping: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct PerturbSection {
    pub retries: Option<u32>,
    pub temperature: Option<f64>,
    #[serde(default)]
    pub temperature_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct RunSection {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    OpenaiCompatible,
    Gemini,
    Mock,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "openai-compatible" | "openai" => Ok(ProviderKind::OpenaiCompatible),
            "gemini" => Ok(ProviderKind::Gemini),
            "mock" => Ok(ProviderKind::Mock),
            other => Err(format!(
                "unknown provider {other:?} (expected openai-compatible | gemini | mock)"
            )),
        }
    }
}

/// Fully-resolved configuration for one pipeline invocation.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub out_root: PathBuf,
    pub run_id: String,
    pub resumed: bool,
    pub aspects: Vec<PerturbationAspect>,
    pub variants: Vec<CotVariant>,
    pub provider: ProviderKind,
    pub model_id: String,
    #[serde(skip)]
    pub api_key: String,
    pub base_url: String,
    #[serde(skip)]
    pub mock_script: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub rules_file: Option<PathBuf>,
    pub seed: u64,
    pub jobs: usize,
    pub alpha: f64,
    pub margin_dim: f64,
    pub margin_overall: f64,
    pub margin_decision: f64,
    pub decision_mapping: String,
    pub perturb_retries: u32,
    pub perturb_temperature: f64,
    pub temperature_overrides: BTreeMap<String, f64>,
    pub max_retries: u32,
    pub requests_per_minute: u32,
    pub max_in_flight: usize,
    pub max_output_tokens: u32,
    pub max_paper_chars: Option<usize>,
}

impl PipelineConfig {
    pub fn decision_scheme(&self) -> DecisionMapping {
        match self.decision_mapping.as_str() {
            "proportional" => DecisionMapping::proportional_default(),
            _ => DecisionMapping::Simple,
        }
    }

    pub fn taxonomy_rules(&self) -> Result<TaxonomyRules, String> {
        match &self.rules_file {
            Some(path) => TaxonomyRules::load(path).map_err(|e| e.to_string()),
            None => Ok(TaxonomyRules::default_rules()),
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            initial_backoff_ms: 250,
            requests_per_minute: self.requests_per_minute,
            max_in_flight: self.max_in_flight,
        }
    }

    pub fn build_provider(&self) -> Result<Box<dyn Provider>, String> {
        match self.provider {
            ProviderKind::Mock => {
                let path = self
                    .mock_script
                    .as_ref()
                    .ok_or("mock provider requires --mock-script (or provider.mock_script)")?;
                Ok(Box::new(MockProvider::new(MockScript::load(path)?)))
            }
            ProviderKind::OpenaiCompatible => {
                if self.api_key.is_empty() {
                    return Err(format!("{ENV_API_KEY} is required for the openai provider"));
                }
                Ok(Box::new(OpenAiProvider::new(&self.base_url, &self.api_key)))
            }
            ProviderKind::Gemini => {
                if self.api_key.is_empty() {
                    return Err(format!("{ENV_API_KEY} is required for the gemini provider"));
                }
                Ok(Box::new(GeminiProvider::new(&self.base_url, &self.api_key)))
            }
        }
    }

    pub fn build_gateway(&self) -> Result<Gateway, String> {
        let provider = self.build_provider()?;
        let cache = ResponseCache::new(&self.cache_dir);
        Ok(Gateway::new(provider, Some(cache), self.retry_policy()))
    }

    // Directory layout under out_root.

    pub fn perturbed_dir(&self, aspect: PerturbationAspect) -> PathBuf {
        self.out_root.join("out").join(aspect.to_string())
    }

    pub fn buckets_dir(&self) -> PathBuf {
        self.out_root.join("buckets")
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_root.join("runs").join(&self.run_id)
    }

    pub fn arm_dir(&self, arm: &str) -> PathBuf {
        self.run_dir().join(arm)
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.out_root.join("analysis")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out_root.join("report")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.run_dir().join("manifest.json")
    }
}
