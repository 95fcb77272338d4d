//! Deterministic mapping of raw chart signal names onto catalog paths,
//! plus the prompt templates and pluggable generation backend used when a
//! live model endpoint is configured.
//!
//! The offline matcher scores a raw name against every catalog leaf by
//! Jaccard similarity over identifier tokens of the final path segment.
//! Names that do not clear the threshold come back as a [`Clarification`]
//! with ranked candidates instead of a silent bad guess.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::vss_catalog::{Catalog, SignalNode};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Split an identifier into lowercase tokens at camelCase boundaries,
/// digit/letter boundaries and `_`, `.`, `-` separators.
pub fn tokenize(name: &str) -> Vec<String> {
    #[derive(PartialEq, Clone, Copy)]
    enum Class {
        Upper,
        Lower,
        Digit,
    }
    let classify = |c: char| {
        if c.is_ascii_digit() {
            Class::Digit
        } else if c.is_uppercase() {
            Class::Upper
        } else {
            Class::Lower
        }
    };

    let mut tokens = Vec::new();
    for run in name.split(|c: char| !c.is_alphanumeric()) {
        if run.is_empty() {
            continue;
        }
        let chars: Vec<char> = run.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let prev = classify(chars[i - 1]);
            let cur = classify(chars[i]);
            let next = chars.get(i + 1).map(|c| classify(*c));
            let boundary = match (prev, cur) {
                (Class::Lower, Class::Upper) => true,
                (Class::Digit, Class::Upper) => true,
                // An acronym run ends before its last capital: HVACAuto -> HVAC | Auto.
                (Class::Upper, Class::Upper) => next == Some(Class::Lower),
                (Class::Upper | Class::Lower, Class::Digit) => true,
                (Class::Digit, Class::Lower) => true,
                _ => false,
            };
            if boundary {
                tokens.push(chars[start..i].iter().collect::<String>().to_lowercase());
                start = i;
            }
        }
        tokens.push(chars[start..].iter().collect::<String>().to_lowercase());
    }
    tokens
}

/// Jaccard similarity of two token multisets, taken as sets. Both empty
/// yields 0.
pub fn token_jaccard(a: &[String], b: &[String]) -> f64 {
    let sa: BTreeSet<&String> = a.iter().collect();
    let sb: BTreeSet<&String> = b.iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    let inter = sa.intersection(&sb).count();
    inter as f64 / union as f64
}

/// Similarity of a raw name to a catalog leaf: Jaccard over the tokens of
/// the leaf's final path segment.
pub fn score(raw: &str, leaf: &SignalNode) -> f64 {
    debug_assert!(leaf.is_leaf());
    token_jaccard(&tokenize(raw), &tokenize(leaf.last_segment()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapMethod {
    Exact,
    Similarity,
    Manual,
    Backend,
}

impl MapMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            MapMethod::Exact => "exact",
            MapMethod::Similarity => "similarity",
            MapMethod::Manual => "manual",
            MapMethod::Backend => "backend",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mapping {
    pub raw_name: String,
    pub path: String,
    pub score: f64,
    pub method: MapMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clarification {
    pub raw_name: String,
    /// Up to three `(path, score)` candidates, best first.
    pub candidates: Vec<(String, f64)>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MapOutcome {
    Mapped(Mapping),
    NeedsClarification(Clarification),
}

impl MapOutcome {
    pub fn mapping(&self) -> Option<&Mapping> {
        match self {
            MapOutcome::Mapped(m) => Some(m),
            MapOutcome::NeedsClarification(_) => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("manual override for `{raw}` points at `{path}`, which is not a catalog leaf")]
    OverrideInvalid { raw: String, path: String },
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("line {line}: malformed override line (expected `raw_name path`)")]
    MalformedOverride { line: usize },
}

/// Parse a two-column `raw_name path` override file.
pub fn parse_overrides(text: &str) -> Result<BTreeMap<String, String>, MapError> {
    let mut table = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let mut words = line.split_whitespace();
        let Some(raw) = words.next() else { continue };
        let (Some(path), None) = (words.next(), words.next()) else {
            return Err(MapError::MalformedOverride { line: idx + 1 });
        };
        table.insert(raw.to_string(), path.to_string());
    }
    Ok(table)
}

/// Map one raw name to a catalog path, or request clarification.
///
/// Manual overrides win outright. Otherwise the best-scoring leaf is chosen,
/// ties broken by larger token overlap with the full path, then by
/// lexicographically smaller path. Results below `threshold` come back as a
/// [`Clarification`] carrying the top three candidates.
pub fn map_signal(
    raw: &str,
    catalog: &Catalog,
    threshold: f64,
    overrides: &BTreeMap<String, String>,
) -> Result<MapOutcome, MapError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(MapError::InvalidThreshold(threshold));
    }
    if let Some(path) = overrides.get(raw) {
        let ok = catalog.resolve(path).map(|n| n.is_leaf()).unwrap_or(false);
        if !ok {
            return Err(MapError::OverrideInvalid { raw: raw.to_string(), path: path.clone() });
        }
        return Ok(MapOutcome::Mapped(Mapping {
            raw_name: raw.to_string(),
            path: path.clone(),
            score: 1.0,
            method: MapMethod::Manual,
        }));
    }

    let raw_tokens = tokenize(raw);
    let mut ranked: Vec<(f64, usize, &str)> = catalog
        .leaves()
        .iter()
        .map(|leaf| {
            let s = token_jaccard(&raw_tokens, &tokenize(leaf.last_segment()));
            let full_overlap = {
                let full = tokenize(&leaf.path);
                let full_set: BTreeSet<&String> = full.iter().collect();
                raw_tokens.iter().collect::<BTreeSet<_>>().intersection(&full_set).count()
            };
            (s, full_overlap, leaf.path.as_str())
        })
        .collect();
    // Best first: score desc, full-path overlap desc, path asc.
    ranked.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(b.1.cmp(&a.1))
            .then(a.2.cmp(b.2))
    });

    match ranked.first() {
        Some(&(best, _, path)) if best >= threshold => Ok(MapOutcome::Mapped(Mapping {
            raw_name: raw.to_string(),
            path: path.to_string(),
            score: best,
            method: if best == 1.0 { MapMethod::Exact } else { MapMethod::Similarity },
        })),
        _ => {
            let best = ranked.first().map(|r| r.0).unwrap_or(0.0);
            Ok(MapOutcome::NeedsClarification(Clarification {
                raw_name: raw.to_string(),
                candidates: ranked
                    .iter()
                    .take(3)
                    .map(|(s, _, p)| (p.to_string(), *s))
                    .collect(),
                reason: format!("best score {best:.3} below threshold {threshold:.3}"),
            }))
        }
    }
}

/// Map a batch of raw names sequentially.
pub fn map_signals_seq(
    raws: &[String],
    catalog: &Catalog,
    threshold: f64,
    overrides: &BTreeMap<String, String>,
) -> Result<Vec<MapOutcome>, MapError> {
    raws.iter().map(|r| map_signal(r, catalog, threshold, overrides)).collect()
}

/// Map a batch of raw names across the rayon pool. Output order matches the
/// input order regardless of scheduling.
#[cfg(feature = "parallel")]
pub fn map_signals_par(
    raws: &[String],
    catalog: &Catalog,
    threshold: f64,
    overrides: &BTreeMap<String, String>,
) -> Result<Vec<MapOutcome>, MapError> {
    use rayon::prelude::*;
    raws.par_iter().map(|r| map_signal(r, catalog, threshold, overrides)).collect()
}

/// Batch mapping; parallel when the `parallel` feature is enabled.
pub fn map_signals(
    raws: &[String],
    catalog: &Catalog,
    threshold: f64,
    overrides: &BTreeMap<String, String>,
) -> Result<Vec<MapOutcome>, MapError> {
    #[cfg(feature = "parallel")]
    {
        map_signals_par(raws, catalog, threshold, overrides)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_signals_seq(raws, catalog, threshold, overrides)
    }
}

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptTask {
    Extract,
    Map,
    Codegen,
}

/// Named placeholders a template may carry.
pub const PLACEHOLDERS: [&str; 5] = [
    "[signal list from diagram]",
    "[VSS catalog]",
    "[Gherkin test case]",
    "[digital.auto test example]",
    "[VSS signals]",
];

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub task: PromptTask,
    pub template: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("placeholder `{0}` not filled")]
    MissingPlaceholder(String),
}

/// Literal placeholder substitution. Every placeholder present in the
/// template must have a fill; extra fills are ignored.
pub fn render_prompt(
    template: &PromptTemplate,
    fills: &BTreeMap<String, String>,
) -> Result<String, PromptError> {
    let mut out = template.template.clone();
    for placeholder in PLACEHOLDERS {
        if !out.contains(placeholder) {
            continue;
        }
        let fill = fills
            .get(placeholder)
            .ok_or_else(|| PromptError::MissingPlaceholder(placeholder.to_string()))?;
        out = out.replace(placeholder, fill);
    }
    Ok(out)
}

/// The three shipped templates.
#[derive(Debug, Clone)]
pub struct PromptSet {
    pub extract: PromptTemplate,
    pub map: PromptTemplate,
    pub codegen: PromptTemplate,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            extract: PromptTemplate { task: PromptTask::Extract, template: crate::assets::PROMPT_EXTRACT.to_string() },
            map: PromptTemplate { task: PromptTask::Map, template: crate::assets::PROMPT_MAP.to_string() },
            codegen: PromptTemplate { task: PromptTask::Codegen, template: crate::assets::PROMPT_CODEGEN.to_string() },
        }
    }
}

// ---------------------------------------------------------------------------
// Generation backends
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum BackendError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("endpoint request failed: {0}")]
    Transport(String),
    #[error("bad backend reply: {0}")]
    BadReply(String),
}

/// Signal-mapping backend: the deterministic offline matcher or a remote
/// model endpoint.
pub trait GenBackend {
    fn map_signals(&self, raws: &[String], catalog: &Catalog) -> Result<Vec<MapOutcome>, BackendError>;
}

/// Default backend: the scored matcher above.
pub struct OfflineBackend {
    pub threshold: f64,
    pub overrides: BTreeMap<String, String>,
}

impl GenBackend for OfflineBackend {
    fn map_signals(&self, raws: &[String], catalog: &Catalog) -> Result<Vec<MapOutcome>, BackendError> {
        Ok(map_signals(raws, catalog, self.threshold, &self.overrides)?)
    }
}

/// Remote backend: renders the mapping prompt, posts it to the configured
/// endpoint and expects one reply line per raw name — either a catalog leaf
/// path or `?` to request clarification.
pub struct ExternalBackend {
    pub endpoint: String,
    pub prompts: PromptSet,
}

impl ExternalBackend {
    pub fn mapping_prompt(&self, raws: &[String], catalog: &Catalog) -> Result<String, PromptError> {
        let mut fills = BTreeMap::new();
        fills.insert("[signal list from diagram]".to_string(), raws.join("\n"));
        let listing = catalog
            .leaves()
            .iter()
            .map(|n| {
                format!(
                    "{} {} {}",
                    n.path,
                    n.kind.as_str(),
                    n.datatype.map(|d| d.as_str()).unwrap_or("")
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        fills.insert("[VSS catalog]".to_string(), listing);
        render_prompt(&self.prompts.map, &fills)
    }

    /// Interpret a path-per-line reply against the catalog.
    pub fn parse_reply(&self, raws: &[String], catalog: &Catalog, reply: &str) -> Result<Vec<MapOutcome>, BackendError> {
        let lines: Vec<&str> = reply.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if lines.len() != raws.len() {
            return Err(BackendError::BadReply(format!(
                "expected {} lines, got {}",
                raws.len(),
                lines.len()
            )));
        }
        raws.iter()
            .zip(lines)
            .map(|(raw, line)| {
                if line == "?" {
                    return Ok(MapOutcome::NeedsClarification(Clarification {
                        raw_name: raw.clone(),
                        candidates: Vec::new(),
                        reason: "backend requested clarification".to_string(),
                    }));
                }
                match catalog.resolve(line) {
                    Ok(node) if node.is_leaf() => Ok(MapOutcome::Mapped(Mapping {
                        raw_name: raw.clone(),
                        path: line.to_string(),
                        score: 1.0,
                        method: MapMethod::Backend,
                    })),
                    _ => Err(BackendError::BadReply(format!("`{line}` is not a catalog leaf"))),
                }
            })
            .collect()
    }
}

impl GenBackend for ExternalBackend {
    fn map_signals(&self, raws: &[String], catalog: &Catalog) -> Result<Vec<MapOutcome>, BackendError> {
        let prompt = self.mapping_prompt(raws, catalog)?;
        let mut response = ureq::post(&self.endpoint)
            .header("content-type", "text/plain")
            .send(&prompt)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        self.parse_reply(raws, catalog, &body)
    }
}
