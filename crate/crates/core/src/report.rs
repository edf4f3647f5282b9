//! Report assembly: aggregate per-(aspect, variant) analysis artifacts into
//! delta tables, verdict grids, decision summaries, and simple rendered
//! charts.
//!
//! Data CSVs are the contract; SVGs are derivative renderings. Two-decimal
//! display columns always travel with a full-precision sibling, and building
//! a report never mutates the analysis artifacts it reads. Output bytes are
//! a pure function of the artifacts, so repeated builds are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llmgate::RunManifest;
use crate::perturb::PerturbationAspect;
use crate::roles::FinalDecision;
use crate::stats::{DecisionMapping, PairedObservation, TestVerdict};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing analysis for {0}")]
    MissingAnalysis(String),
    #[error("matrix shape {rows}x{cols} does not match the {expected} categories")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub const REVIEWER_VARIANT: &str = "reviewer";
/// Meta-review table column order.
pub const META_VARIANTS: [&str; 3] = ["dimension", "none", "template"];

/// Per-metric analysis output for one (aspect, variant) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAnalysis {
    pub metric: String,
    pub margin: f64,
    pub n: usize,
    pub mean_delta: f64,
    pub verdict: TestVerdict,
    pub excluded: Vec<String>,
    pub pairs: Vec<PairedObservation>,
}

/// Decision-level summaries for one meta (aspect, variant) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionStats {
    pub mapping: DecisionMapping,
    pub kappa: f64,
    pub transition_order: Vec<FinalDecision>,
    pub transition_counts: Vec<Vec<u64>>,
    pub acceptance_rate_delta_pct: f64,
    /// (decision, percentage-point delta) in transition_order order.
    pub distribution_delta_pct: Vec<(FinalDecision, f64)>,
}

/// One `analysis/<aspect>.<variant>.json` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisArtifact {
    pub schema_version: u32,
    pub aspect: PerturbationAspect,
    /// "reviewer" or a meta CoT variant.
    pub variant: String,
    pub alpha: f64,
    pub metrics: BTreeMap<String, MetricAnalysis>,
    pub decision_stats: Option<DecisionStats>,
    /// Bundles dropped before pairing (perturbation or parse failures).
    pub excluded_bundles: Vec<String>,
}

impl AnalysisArtifact {
    pub fn file_name(&self) -> String {
        format!("{}.{}.json", self.aspect, self.variant)
    }

    pub fn load(path: &Path) -> Result<AnalysisArtifact, ReportError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, dir: &Path) -> Result<(), ReportError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = dir.join(self.file_name());
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }
}

/// Reviewer score columns in table order.
pub const REVIEWER_METRICS: [&str; 4] = [
    "contribution_score",
    "soundness_score",
    "presentation_score",
    "overall_rating",
];
/// Meta-review metrics in table order.
pub const META_METRICS: [&str; 2] = ["final_decision", "overall_score"];

fn full(v: f64) -> String {
    format!("{v}")
}

fn two_dp(v: f64) -> String {
    format!("{v:.2}")
}

fn find<'a>(
    artifacts: &'a [AnalysisArtifact],
    aspect: PerturbationAspect,
    variant: &str,
) -> Option<&'a AnalysisArtifact> {
    artifacts
        .iter()
        .find(|a| a.aspect == aspect && a.variant == variant)
}

fn write_file(path: &Path, bytes: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

fn reviewer_aspects(artifacts: &[AnalysisArtifact]) -> Vec<PerturbationAspect> {
    PerturbationAspect::ALL
        .into_iter()
        .filter(|a| find(artifacts, *a, REVIEWER_VARIANT).is_some())
        .collect()
}

fn meta_aspects(artifacts: &[AnalysisArtifact]) -> Vec<PerturbationAspect> {
    PerturbationAspect::ALL
        .into_iter()
        .filter(|a| {
            META_VARIANTS
                .iter()
                .any(|v| find(artifacts, *a, v).is_some())
        })
        .collect()
}

fn reviewer_delta_table(artifacts: &[AnalysisArtifact]) -> String {
    let mut out = String::from("aspect");
    for metric in REVIEWER_METRICS {
        out.push_str(&format!(",{metric},{metric}_full"));
    }
    out.push('\n');
    for aspect in reviewer_aspects(artifacts) {
        let artifact = find(artifacts, aspect, REVIEWER_VARIANT).unwrap();
        out.push_str(aspect.aspect_name());
        for metric in REVIEWER_METRICS {
            match artifact.metrics.get(metric) {
                Some(m) => {
                    out.push_str(&format!(",{},{}", two_dp(m.mean_delta), full(m.mean_delta)))
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

fn reviewer_verdict_table(artifacts: &[AnalysisArtifact]) -> String {
    let mut out = String::from("aspect,score_column,verdict,n,mean_delta,mean_delta_full\n");
    for aspect in reviewer_aspects(artifacts) {
        let artifact = find(artifacts, aspect, REVIEWER_VARIANT).unwrap();
        for metric in REVIEWER_METRICS {
            if let Some(m) = artifact.metrics.get(metric) {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    aspect.aspect_name(),
                    metric,
                    m.verdict.value,
                    m.n,
                    two_dp(m.mean_delta),
                    full(m.mean_delta)
                ));
            }
        }
    }
    out
}

fn meta_delta_table(artifacts: &[AnalysisArtifact]) -> String {
    let mut out = String::from("mode,aspect");
    for variant in META_VARIANTS {
        out.push_str(&format!(",{variant},{variant}_full"));
    }
    out.push('\n');
    for aspect in meta_aspects(artifacts) {
        out.push_str(&format!("{},{}", aspect.mode(), aspect.aspect_name()));
        for variant in META_VARIANTS {
            let cell =
                find(artifacts, aspect, variant).and_then(|a| a.metrics.get("overall_score"));
            match cell {
                Some(m) => {
                    out.push_str(&format!(",{},{}", two_dp(m.mean_delta), full(m.mean_delta)))
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

fn meta_verdict_table(artifacts: &[AnalysisArtifact]) -> String {
    let mut out = String::from("mode,aspect");
    for variant in META_VARIANTS {
        for metric in META_METRICS {
            out.push_str(&format!(",{variant}_{metric}"));
        }
    }
    out.push('\n');
    for aspect in meta_aspects(artifacts) {
        out.push_str(&format!("{},{}", aspect.mode(), aspect.aspect_name()));
        for variant in META_VARIANTS {
            for metric in META_METRICS {
                let verdict = find(artifacts, aspect, variant)
                    .and_then(|a| a.metrics.get(metric))
                    .map(|m| m.verdict.value.to_string())
                    .unwrap_or_default();
                out.push_str(&format!(",{verdict}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Per-category share changes of the final decision, in (poster, reject,
/// oral, spotlight) column order.
fn decision_distribution_table(artifacts: &[AnalysisArtifact]) -> String {
    const COLUMNS: [FinalDecision; 4] = [
        FinalDecision::AcceptPoster,
        FinalDecision::Reject,
        FinalDecision::AcceptOral,
        FinalDecision::AcceptSpotlight,
    ];
    let mut out = String::from(
        "mode,aspect,variant,accept_poster_pct,reject_pct,accept_oral_pct,accept_spotlight_pct\n",
    );
    for aspect in meta_aspects(artifacts) {
        for variant in META_VARIANTS {
            let Some(stats) =
                find(artifacts, aspect, variant).and_then(|a| a.decision_stats.as_ref())
            else {
                continue;
            };
            out.push_str(&format!(
                "{},{},{variant}",
                aspect.mode(),
                aspect.aspect_name()
            ));
            for column in COLUMNS {
                let delta = stats
                    .distribution_delta_pct
                    .iter()
                    .find(|(d, _)| *d == column)
                    .map(|(_, v)| *v)
                    .unwrap_or(0.0);
                out.push_str(&format!(",{}", full(delta)));
            }
            out.push('\n');
        }
    }
    out
}

fn kappa_table(artifacts: &[AnalysisArtifact]) -> String {
    let mut out = String::from("mode,aspect,dimension,none,template\n");
    for aspect in meta_aspects(artifacts) {
        out.push_str(&format!("{},{}", aspect.mode(), aspect.aspect_name()));
        for variant in META_VARIANTS {
            let kappa = find(artifacts, aspect, variant)
                .and_then(|a| a.decision_stats.as_ref())
                .map(|s| full(s.kappa))
                .unwrap_or_default();
            out.push_str(&format!(",{kappa}"));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Figures
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    AcceptanceDeltaBars,
    TransitionHeatmap,
    DeltaDistribution,
}

/// A figure's tabular payload plus its optional rendering. The data alone is
/// sufficient to re-render.
#[derive(Debug, Clone)]
pub struct FigureBundle {
    pub kind: FigureKind,
    pub name: String,
    pub data_csv: String,
    pub rendered_svg: Option<String>,
}

fn acceptance_delta_figure(artifacts: &[AnalysisArtifact]) -> FigureBundle {
    let mut csv = String::from("mode,aspect,variant,acceptance_rate_delta_pp\n");
    let mut bars: Vec<(String, f64)> = Vec::new();
    for aspect in meta_aspects(artifacts) {
        for variant in META_VARIANTS {
            if let Some(stats) =
                find(artifacts, aspect, variant).and_then(|a| a.decision_stats.as_ref())
            {
                csv.push_str(&format!(
                    "{},{},{variant},{}\n",
                    aspect.mode(),
                    aspect.aspect_name(),
                    full(stats.acceptance_rate_delta_pct)
                ));
                bars.push((
                    format!("{aspect}/{variant}"),
                    stats.acceptance_rate_delta_pct,
                ));
            }
        }
    }
    let svg = render_bar_chart(&bars);
    FigureBundle {
        kind: FigureKind::AcceptanceDeltaBars,
        name: "acceptance_delta_bars".to_string(),
        data_csv: csv,
        rendered_svg: Some(svg),
    }
}

fn delta_distribution_figure(artifacts: &[AnalysisArtifact]) -> FigureBundle {
    let mut csv = String::from("aspect,variant,metric,bundle_id,baseline,perturbed,delta\n");
    for aspect in PerturbationAspect::ALL {
        for artifact in artifacts.iter().filter(|a| a.aspect == aspect) {
            for (metric, analysis) in &artifact.metrics {
                for pair in &analysis.pairs {
                    csv.push_str(&format!(
                        "{aspect},{},{metric},{},{},{},{}\n",
                        artifact.variant,
                        pair.bundle_id,
                        full(pair.baseline),
                        full(pair.perturbed),
                        full(pair.perturbed - pair.baseline)
                    ));
                }
            }
        }
    }
    FigureBundle {
        kind: FigureKind::DeltaDistribution,
        name: "delta_distribution".to_string(),
        data_csv: csv,
        rendered_svg: None,
    }
}

fn transition_figures(artifacts: &[AnalysisArtifact]) -> Result<Vec<FigureBundle>, ReportError> {
    let mut figures = Vec::new();
    for aspect in meta_aspects(artifacts) {
        for variant in META_VARIANTS {
            let Some(stats) =
                find(artifacts, aspect, variant).and_then(|a| a.decision_stats.as_ref())
            else {
                continue;
            };
            let order: Vec<String> = stats
                .transition_order
                .iter()
                .map(|d| d.to_string())
                .collect();
            let mut csv = String::from("before");
            for label in &order {
                csv.push_str(&format!(",{label}"));
            }
            csv.push('\n');
            for (i, row) in stats.transition_counts.iter().enumerate() {
                csv.push_str(&order[i]);
                for count in row {
                    csv.push_str(&format!(",{count}"));
                }
                csv.push('\n');
            }
            let svg = render_heatmap(&stats.transition_counts, &order)?;
            figures.push(FigureBundle {
                kind: FigureKind::TransitionHeatmap,
                name: format!("transition_{aspect}.{variant}"),
                data_csv: csv,
                rendered_svg: Some(svg),
            });
        }
    }
    Ok(figures)
}

fn heat_color(value: u64, max: u64) -> String {
    if max == 0 {
        return "rgb(255,255,255)".to_string();
    }
    let t = value as f64 / max as f64;
    let lerp = |from: f64, to: f64| (from + t * (to - from)).round() as u8;
    format!(
        "rgb({},{},{})",
        lerp(255.0, 42.0),
        lerp(255.0, 98.0),
        lerp(255.0, 166.0)
    )
}

/// Annotated grid chart for a square transition matrix; identical input
/// yields identical bytes.
pub fn render_heatmap(matrix: &[Vec<u64>], order: &[String]) -> Result<String, ReportError> {
    let n = order.len();
    if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
        return Err(ReportError::ShapeMismatch {
            rows: matrix.len(),
            cols: matrix.first().map_or(0, Vec::len),
            expected: n,
        });
    }
    const CELL: usize = 84;
    const LEFT: usize = 140;
    const TOP: usize = 56;
    let width = LEFT + n * CELL + 12;
    let height = TOP + n * CELL + 12;
    let max = matrix.iter().flatten().copied().max().unwrap_or(0);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"monospace\" font-size=\"13\">\n"
    );
    svg.push_str("<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (j, label) in order.iter().enumerate() {
        let x = LEFT + j * CELL + CELL / 2;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
            TOP - 16
        ));
    }
    for (i, row) in matrix.iter().enumerate() {
        let y_label = TOP + i * CELL + CELL / 2 + 4;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{y_label}\" text-anchor=\"end\">{}</text>\n",
            LEFT - 10,
            order[i]
        ));
        for (j, &count) in row.iter().enumerate() {
            let x = LEFT + j * CELL;
            let y = TOP + i * CELL;
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\" stroke=\"black\"/>\n",
                heat_color(count, max)
            ));
            let text_color = if max > 0 && count * 2 > max {
                "white"
            } else {
                "black"
            };
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{text_color}\">{count}</text>\n",
                x + CELL / 2,
                y + CELL / 2 + 4
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn render_bar_chart(bars: &[(String, f64)]) -> String {
    const ROW: usize = 22;
    const LEFT: usize = 280;
    const SCALE: f64 = 1.6; // pixels per percentage point
    const HALF: usize = 180;
    let height = bars.len() * ROW + 40;
    let width = LEFT + 2 * HALF + 40;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"monospace\" font-size=\"12\">\n"
    );
    svg.push_str("<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let zero_x = LEFT + HALF;
    svg.push_str(&format!(
        "<line x1=\"{zero_x}\" y1=\"10\" x2=\"{zero_x}\" y2=\"{}\" stroke=\"black\"/>\n",
        height - 10
    ));
    for (i, (label, value)) in bars.iter().enumerate() {
        let y = 20 + i * ROW;
        let magnitude = (value.abs() * SCALE).round() as usize;
        let magnitude = magnitude.min(HALF);
        let (x, fill) = if *value < 0.0 {
            (zero_x - magnitude, "rgb(178,34,34)")
        } else {
            (zero_x, "rgb(42,98,166)")
        };
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{label}</text>\n",
            LEFT - 8,
            y + ROW / 2 + 2
        ));
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"{y}\" width=\"{magnitude}\" height=\"{}\" fill=\"{fill}\"/>\n",
            ROW - 6
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            zero_x + HALF + 6,
            y + ROW / 2 + 2,
            two_dp(*value)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// Summary and assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct SummaryCell {
    verdict: String,
    n: usize,
    mean_delta: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    schema_version: u32,
    run_id: &'a str,
    alpha: f64,
    aspects: Vec<String>,
    variants: Vec<String>,
    /// aspect -> variant -> metric -> cell
    verdict_grid: BTreeMap<String, BTreeMap<String, BTreeMap<String, SummaryCell>>>,
    excluded_bundles: BTreeMap<String, Vec<String>>,
}

/// Build the report directory from analysis artifacts and the run manifest.
pub fn build_report(
    artifacts: &[AnalysisArtifact],
    manifest: &RunManifest,
    report_dir: &Path,
) -> Result<(), ReportError> {
    if artifacts.is_empty() {
        return Err(ReportError::MissingAnalysis(
            "no analysis artifacts".to_string(),
        ));
    }

    let tables = report_dir.join("tables");
    if !reviewer_aspects(artifacts).is_empty() {
        write_file(
            &tables.join("reviewer_deltas.csv"),
            &reviewer_delta_table(artifacts),
        )?;
        write_file(
            &tables.join("reviewer_verdicts.csv"),
            &reviewer_verdict_table(artifacts),
        )?;
    }
    if !meta_aspects(artifacts).is_empty() {
        write_file(
            &tables.join("meta_deltas.csv"),
            &meta_delta_table(artifacts),
        )?;
        write_file(
            &tables.join("meta_verdicts.csv"),
            &meta_verdict_table(artifacts),
        )?;
        write_file(
            &tables.join("decision_distribution_delta.csv"),
            &decision_distribution_table(artifacts),
        )?;
        write_file(&tables.join("decision_kappa.csv"), &kappa_table(artifacts))?;
    }

    let figures_dir = report_dir.join("figures");
    let mut figures = vec![
        acceptance_delta_figure(artifacts),
        delta_distribution_figure(artifacts),
    ];
    figures.extend(transition_figures(artifacts)?);
    for figure in &figures {
        write_file(
            &figures_dir.join(format!("{}.csv", figure.name)),
            &figure.data_csv,
        )?;
        if let Some(svg) = &figure.rendered_svg {
            write_file(&figures_dir.join(format!("{}.svg", figure.name)), svg)?;
        }
    }

    let mut grid: BTreeMap<String, BTreeMap<String, BTreeMap<String, SummaryCell>>> =
        BTreeMap::new();
    let mut excluded: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut variants: Vec<String> = Vec::new();
    for aspect in PerturbationAspect::ALL {
        for artifact in artifacts.iter().filter(|a| a.aspect == aspect) {
            if !variants.contains(&artifact.variant) {
                variants.push(artifact.variant.clone());
            }
            let cell = grid.entry(aspect.to_string()).or_default();
            let by_metric = cell.entry(artifact.variant.clone()).or_default();
            for (metric, analysis) in &artifact.metrics {
                by_metric.insert(
                    metric.clone(),
                    SummaryCell {
                        verdict: analysis.verdict.value.to_string(),
                        n: analysis.n,
                        mean_delta: analysis.mean_delta,
                    },
                );
            }
            if !artifact.excluded_bundles.is_empty() {
                excluded.insert(
                    format!("{}.{}", aspect, artifact.variant),
                    artifact.excluded_bundles.clone(),
                );
            }
        }
    }
    variants.sort();
    let summary = Summary {
        schema_version: 1,
        run_id: &manifest.run_id,
        alpha: artifacts[0].alpha,
        aspects: artifacts
            .iter()
            .map(|a| a.aspect.to_string())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect(),
        variants,
        verdict_grid: grid,
        excluded_bundles: excluded,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_file(&report_dir.join("summary.json"), &text)?;
    Ok(())
}
