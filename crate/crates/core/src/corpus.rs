//! Paper/review/rebuttal bundles on disk.
//!
//! A bundle directory holds `paper.mmd` (markdown with `#` headings; math and
//! tables stay verbatim LaTeX), `review_<n>.json`, and `rebuttal_<n>.json`.
//! A corpus is a `corpus.json` index listing bundle directories and their
//! acceptance categories. Loading is strict: sections must reassemble to the
//! source bytes, review scores must be in range, and every rebuttal must name
//! an existing review.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed heading in {path}: {detail}")]
    MalformedHeading { path: PathBuf, detail: String },
    #[error("rebuttal {rebuttal} references unknown review id {review_id}")]
    OrphanRebuttal {
        rebuttal: PathBuf,
        review_id: String,
    },
    #[error("insufficient pool for {category}: need {need}, have {have}")]
    InsufficientPool {
        category: AcceptanceCategory,
        need: usize,
        have: usize,
    },
    #[error("invalid document {path}: {detail}")]
    InvalidDocument { path: PathBuf, detail: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Acceptance category of a paper in the corpus (accepted papers only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceCategory {
    Poster,
    Spotlight,
    Oral,
}

impl AcceptanceCategory {
    pub const ALL: [AcceptanceCategory; 3] = [
        AcceptanceCategory::Poster,
        AcceptanceCategory::Spotlight,
        AcceptanceCategory::Oral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AcceptanceCategory::Poster => "poster",
            AcceptanceCategory::Spotlight => "spotlight",
            AcceptanceCategory::Oral => "oral",
        }
    }
}

impl fmt::Display for AcceptanceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One `#`-headed section of a paper.
///
/// `body` carries every byte from the end of the heading title up to the next
/// heading (including the newline that terminates the heading line), so
/// concatenating serialized sections reproduces the source file exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub title: String,
    pub level: u32,
    pub body: String,
}

impl Section {
    pub fn serialize_to(&self, out: &mut String) {
        for _ in 0..self.level {
            out.push('#');
        }
        out.push(' ');
        out.push_str(&self.title);
        out.push_str(&self.body);
    }

    /// Body with the leading newline and surrounding blank lines stripped,
    /// for prompting and classification.
    pub fn body_text(&self) -> &str {
        self.body.trim_matches(|c| c == '\n' || c == '\r')
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperDocument {
    pub paper_id: String,
    pub decision_category: AcceptanceCategory,
    pub sections: Vec<Section>,
}

impl PaperDocument {
    pub fn serialize_text(&self) -> String {
        let mut out = String::new();
        for section in &self.sections {
            section.serialize_to(&mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDocument {
    pub review_id: String,
    pub paper_id: String,
    pub summary: String,
    pub strengths: String,
    pub weaknesses: String,
    pub contribution_score: i32,
    pub soundness_score: i32,
    pub presentation_score: i32,
    pub overall_rating: i32,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebuttalDocument {
    pub paper_id: String,
    pub review_id: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub paper: PaperDocument,
    pub reviews: Vec<ReviewDocument>,
    pub rebuttals: Vec<RebuttalDocument>,
}

impl Bundle {
    pub fn bundle_id(&self) -> &str {
        &self.paper.paper_id
    }

    /// Rebuttal answering the given review, if present.
    pub fn rebuttal_for(&self, review_id: &str) -> Option<&RebuttalDocument> {
        self.rebuttals.iter().find(|r| r.review_id == review_id)
    }
}

// ---------------------------------------------------------------------------
// Paper parsing
// ---------------------------------------------------------------------------

/// Split markdown into sections. The document must start with a heading;
/// heading lines are `#`+ followed by a space and a non-blank title. Lines
/// inside ``` fences never count as headings.
pub fn parse_sections(path: &Path, src: &str) -> Result<Vec<Section>, CorpusError> {
    let malformed = |detail: &str| CorpusError::MalformedHeading {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };

    if src.is_empty() {
        return Err(malformed("empty document has no headings"));
    }

    // (byte offset of line start, line content without terminator)
    let mut heads: Vec<(usize, u32, String, usize)> = Vec::new(); // start, level, title, body_start
    let mut in_fence = false;
    let mut offset = 0;
    for line in src.split_inclusive('\n') {
        let content = line.strip_suffix('\n').unwrap_or(line);
        let content = content.strip_suffix('\r').unwrap_or(content);
        if content.trim_start().starts_with("```") {
            in_fence = !in_fence;
        } else if !in_fence && content.starts_with('#') {
            let level = content.bytes().take_while(|&b| b == b'#').count();
            let rest = &content[level..];
            if rest.is_empty() || rest.chars().all(char::is_whitespace) {
                return Err(malformed(&format!(
                    "heading marker without title at byte {offset}"
                )));
            }
            if let Some(title) = rest.strip_prefix(' ') {
                if title.trim().is_empty() {
                    return Err(malformed(&format!(
                        "heading marker without title at byte {offset}"
                    )));
                }
                // Title keeps the raw remainder (including any '\r') so the
                // heading line reassembles byte-for-byte.
                let raw_title = &line[level + 1..];
                let raw_title = raw_title.strip_suffix('\n').unwrap_or(raw_title);
                let body_start = offset + level + 1 + raw_title.len();
                heads.push((offset, level as u32, raw_title.to_string(), body_start));
            }
            // A '#' not followed by a space is ordinary body text.
        }
        offset += line.len();
    }

    if heads.is_empty() {
        return Err(malformed("document contains no headings"));
    }
    if heads[0].0 != 0 {
        return Err(malformed("content before the first heading"));
    }

    let mut sections = Vec::with_capacity(heads.len());
    for (i, (_, level, title, body_start)) in heads.iter().enumerate() {
        let body_end = heads.get(i + 1).map_or(src.len(), |next| next.0);
        sections.push(Section {
            title: title.clone(),
            level: *level,
            body: src[*body_start..body_end].to_string(),
        });
    }
    Ok(sections)
}

// ---------------------------------------------------------------------------
// Review raw text rendering and parsing
// ---------------------------------------------------------------------------

/// Canonical rendering of a review's structured fields. `raw_text` of every
/// stored review must parse back to the same fields.
pub fn render_review_raw_text(
    summary: &str,
    strengths: &str,
    weaknesses: &str,
    contribution: i32,
    soundness: i32,
    presentation: i32,
    rating: i32,
) -> String {
    format!(
        "Summary:\n{summary}\n\nStrengths:\n{strengths}\n\nWeaknesses:\n{weaknesses}\n\n\
         Contribution: {contribution}\nSoundness: {soundness}\n\
         Presentation: {presentation}\nRating: {rating}\n"
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedReviewText {
    pub summary: String,
    pub strengths: String,
    pub weaknesses: String,
    pub contribution_score: i32,
    pub soundness_score: i32,
    pub presentation_score: i32,
    pub overall_rating: i32,
}

/// Re-extract structured fields from a review's raw text.
pub fn parse_review_raw_text(raw: &str) -> Result<ParsedReviewText, String> {
    let section = |label: &str, next_labels: &[&str]| -> Result<String, String> {
        let start = raw
            .find(&format!("{label}\n"))
            .or_else(|| raw.find(&format!("{label} ")))
            .ok_or_else(|| format!("missing section {label}"))?;
        let content_start = start + label.len();
        let mut end = raw.len();
        for next in next_labels {
            if let Some(pos) = raw[content_start..].find(next) {
                end = end.min(content_start + pos);
            }
        }
        Ok(raw[content_start..end].trim().to_string())
    };

    let score = |label: &str, lo: i32, hi: i32| -> Result<i32, String> {
        let line = raw
            .lines()
            .find(|l| l.trim_start().starts_with(label))
            .ok_or_else(|| format!("missing score line {label}"))?;
        let digits: String = line[line.find(label).unwrap() + label.len()..]
            .trim_start()
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .collect();
        let value: i32 = digits
            .parse()
            .map_err(|_| format!("non-numeric value for {label}"))?;
        if value < lo || value > hi {
            return Err(format!("{label} {value} outside [{lo}, {hi}]"));
        }
        Ok(value)
    };

    Ok(ParsedReviewText {
        summary: section("Summary:", &["Strengths:", "Weaknesses:", "Contribution:"])?,
        strengths: section("Strengths:", &["Weaknesses:", "Contribution:"])?,
        weaknesses: section("Weaknesses:", &["Contribution:"])?,
        contribution_score: score("Contribution:", 1, 4)?,
        soundness_score: score("Soundness:", 1, 4)?,
        presentation_score: score("Presentation:", 1, 4)?,
        overall_rating: score("Rating:", 1, 10)?,
    })
}

impl ReviewDocument {
    /// Build a review whose raw_text is the canonical rendering of its fields.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fields(
        review_id: &str,
        paper_id: &str,
        summary: &str,
        strengths: &str,
        weaknesses: &str,
        contribution: i32,
        soundness: i32,
        presentation: i32,
        rating: i32,
    ) -> Self {
        let raw_text = render_review_raw_text(
            summary,
            strengths,
            weaknesses,
            contribution,
            soundness,
            presentation,
            rating,
        );
        ReviewDocument {
            review_id: review_id.to_string(),
            paper_id: paper_id.to_string(),
            summary: summary.to_string(),
            strengths: strengths.to_string(),
            weaknesses: weaknesses.to_string(),
            contribution_score: contribution,
            soundness_score: soundness,
            presentation_score: presentation,
            overall_rating: rating,
            raw_text,
        }
    }

    /// Re-derive structured fields from raw_text (the authoritative side after
    /// text-level perturbations).
    pub fn resync_from_raw_text(&mut self) -> Result<(), String> {
        let parsed = parse_review_raw_text(&self.raw_text)?;
        self.summary = parsed.summary;
        self.strengths = parsed.strengths;
        self.weaknesses = parsed.weaknesses;
        self.contribution_score = parsed.contribution_score;
        self.soundness_score = parsed.soundness_score;
        self.presentation_score = parsed.presentation_score;
        self.overall_rating = parsed.overall_rating;
        Ok(())
    }

    fn validate(&self, path: &Path) -> Result<(), CorpusError> {
        let invalid = |detail: String| CorpusError::InvalidDocument {
            path: path.to_path_buf(),
            detail,
        };
        for (label, value, hi) in [
            ("contribution_score", self.contribution_score, 4),
            ("soundness_score", self.soundness_score, 4),
            ("presentation_score", self.presentation_score, 4),
            ("overall_rating", self.overall_rating, 10),
        ] {
            if value < 1 || value > hi {
                return Err(invalid(format!("{label} {value} outside [1, {hi}]")));
            }
        }
        let parsed = parse_review_raw_text(&self.raw_text).map_err(&invalid)?;
        let matches = parsed.summary == self.summary
            && parsed.strengths == self.strengths
            && parsed.weaknesses == self.weaknesses
            && parsed.contribution_score == self.contribution_score
            && parsed.soundness_score == self.soundness_score
            && parsed.presentation_score == self.presentation_score
            && parsed.overall_rating == self.overall_rating;
        if !matches {
            return Err(invalid(
                "raw_text does not re-yield the structured fields".to_string(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Bundle IO
// ---------------------------------------------------------------------------

fn numbered_files(dir: &Path, prefix: &str) -> Result<Vec<(u32, PathBuf)>, CorpusError> {
    let mut found = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(rest) = name.strip_prefix(prefix) {
            if let Some(num) = rest.strip_suffix(".json") {
                if let Ok(n) = num.parse::<u32>() {
                    found.push((n, entry.path()));
                }
            }
        }
    }
    found.sort();
    Ok(found)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Load one bundle directory. The paper id defaults to the directory name;
/// the acceptance category comes from the corpus index (poster when loaded
/// standalone).
pub fn load_bundle(dir: &Path) -> Result<Bundle, CorpusError> {
    load_bundle_with_meta(dir, None, AcceptanceCategory::Poster)
}

pub fn load_bundle_with_meta(
    dir: &Path,
    paper_id: Option<&str>,
    decision_category: AcceptanceCategory,
) -> Result<Bundle, CorpusError> {
    let paper_path = dir.join("paper.mmd");
    if !paper_path.is_file() {
        return Err(CorpusError::MissingFile(paper_path));
    }
    let paper_src = fs::read_to_string(&paper_path).map_err(|e| io_err(&paper_path, e))?;
    let sections = parse_sections(&paper_path, &paper_src)?;
    let paper_id = paper_id
        .map(str::to_string)
        .or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "paper".to_string());
    let paper = PaperDocument {
        paper_id: paper_id.clone(),
        decision_category,
        sections,
    };

    let review_files = numbered_files(dir, "review_")?;
    if review_files.is_empty() {
        return Err(CorpusError::MissingFile(dir.join("review_1.json")));
    }
    let mut reviews: Vec<ReviewDocument> = Vec::with_capacity(review_files.len());
    let mut review_ids = BTreeSet::new();
    for (_, path) in &review_files {
        let review: ReviewDocument = read_json(path)?;
        review.validate(path)?;
        if review.paper_id != paper_id {
            return Err(CorpusError::InvalidDocument {
                path: path.clone(),
                detail: format!(
                    "review paper_id {} does not match bundle {}",
                    review.paper_id, paper_id
                ),
            });
        }
        if !review_ids.insert(review.review_id.clone()) {
            return Err(CorpusError::InvalidDocument {
                path: path.clone(),
                detail: format!("duplicate review id {}", review.review_id),
            });
        }
        reviews.push(review);
    }

    let mut rebuttals = Vec::new();
    let mut answered = BTreeSet::new();
    for (_, path) in numbered_files(dir, "rebuttal_")? {
        let rebuttal: RebuttalDocument = read_json(&path)?;
        if !review_ids.contains(&rebuttal.review_id) {
            return Err(CorpusError::OrphanRebuttal {
                rebuttal: path,
                review_id: rebuttal.review_id,
            });
        }
        if !answered.insert(rebuttal.review_id.clone()) {
            return Err(CorpusError::InvalidDocument {
                path,
                detail: format!("multiple rebuttals answer review {}", rebuttal.review_id),
            });
        }
        rebuttals.push(rebuttal);
    }

    Ok(Bundle {
        paper,
        reviews,
        rebuttals,
    })
}

/// Write a bundle in the corpus directory layout.
pub fn save_bundle(dir: &Path, bundle: &Bundle) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let paper_path = dir.join("paper.mmd");
    fs::write(&paper_path, bundle.paper.serialize_text()).map_err(|e| io_err(&paper_path, e))?;
    for (i, review) in bundle.reviews.iter().enumerate() {
        let path = dir.join(format!("review_{}.json", i + 1));
        write_json(&path, review)?;
    }
    for (i, rebuttal) in bundle.rebuttals.iter().enumerate() {
        let path = dir.join(format!("rebuttal_{}.json", i + 1));
        write_json(&path, rebuttal)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CorpusError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CorpusError::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// Corpus index
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub dir: String,
    pub paper_id: String,
    pub decision_category: AcceptanceCategory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub schema_version: u32,
    pub bundles: Vec<CorpusEntry>,
}

impl CorpusIndex {
    pub fn load(path: &Path) -> Result<CorpusIndex, CorpusError> {
        if !path.is_file() {
            return Err(CorpusError::MissingFile(path.to_path_buf()));
        }
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        write_json(path, self)
    }

    /// Load every bundle listed by the index, in index order.
    pub fn load_bundles(&self, corpus_root: &Path) -> Result<Vec<Bundle>, CorpusError> {
        self.bundles
            .iter()
            .map(|entry| {
                load_bundle_with_meta(
                    &corpus_root.join(&entry.dir),
                    Some(&entry.paper_id),
                    entry.decision_category,
                )
            })
            .collect()
    }

    pub fn pool(&self) -> Vec<(String, AcceptanceCategory)> {
        self.bundles
            .iter()
            .map(|b| (b.paper_id.clone(), b.decision_category))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Stratified sampling
// ---------------------------------------------------------------------------

/// Per-category sample sizes, in (poster, spotlight, oral) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTargets {
    pub poster: usize,
    pub spotlight: usize,
    pub oral: usize,
}

impl SampleTargets {
    pub fn for_category(&self, category: AcceptanceCategory) -> usize {
        match category {
            AcceptanceCategory::Poster => self.poster,
            AcceptanceCategory::Spotlight => self.spotlight,
            AcceptanceCategory::Oral => self.oral,
        }
    }
}

/// Sample `targets` ids per category uniformly without replacement.
///
/// Output is grouped poster, spotlight, oral; within a category the order is
/// the seeded shuffle order. Each category draws from its own ChaCha12 stream,
/// so the result depends only on (per-category pool order, targets, seed).
pub fn stratified_sample(
    pool: &[(String, AcceptanceCategory)],
    targets: &SampleTargets,
    seed: u64,
) -> Result<Vec<String>, CorpusError> {
    let mut picked = Vec::new();
    for (stream, category) in AcceptanceCategory::ALL.iter().enumerate() {
        let ids: Vec<&String> = pool
            .iter()
            .filter(|(_, c)| c == category)
            .map(|(id, _)| id)
            .collect();
        let need = targets.for_category(*category);
        if need > ids.len() {
            return Err(CorpusError::InsufficientPool {
                category: *category,
                need,
                have: ids.len(),
            });
        }
        let mut rng = rng::seeded_rng(seed, stream as u64);
        let indices = rng::sample_indices(&mut rng, ids.len(), need);
        picked.extend(indices.into_iter().map(|i| ids[i].clone()));
    }
    Ok(picked)
}
