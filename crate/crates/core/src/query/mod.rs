//! Operator queries: grammar, matching against person descriptions, match
//! reports, the camera registry and the fog's feature index.
//!
//! Grammar (case-insensitive):
//!
//! ```text
//! query  := clause ("," clause)*
//! clause := [count ":"] color garment
//! ```
//!
//! `color` may be written with spaces or hyphens (`dark blue` or `dark-blue`).
//! A garment that covers both legs expands to one clause per leg.

mod index;
mod registry;
mod report;
mod vocabulary;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::color::PaletteSet;
use crate::frame::CameraId;
use crate::regions::Section;

pub use index::{FeatureIndex, IndexError, IndexRecord, TimeRange, INDEX_HEADER};
pub use registry::{CameraInfo, CameraRegistry, RegistryError};
pub use report::{build_report, PersonDescription, ReportError, MatchReport};
pub use vocabulary::GarmentVocabulary;

/// Largest accepted per-clause color count.
pub const MAX_COUNT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("empty query")]
    EmptyQuery,
    #[error("unknown garment `{0}`")]
    UnknownGarment(String),
    #[error("unknown color `{color}` for {section}")]
    UnknownColor { color: String, section: Section },
    #[error("invalid color count `{0}`")]
    InvalidCount(String),
    #[error("malformed clause `{0}`")]
    MalformedClause(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub u64);

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which cameras a query applies to.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    All,
    Cameras(Vec<CameraId>),
}

impl Scope {
    pub fn contains(&self, camera: &CameraId) -> bool {
        match self {
            Scope::All => true,
            Scope::Cameras(list) => list.contains(camera),
        }
    }

    /// `all` or a comma-separated camera list.
    pub fn parse(text: &str) -> Scope {
        let text = text.trim();
        if text.is_empty() || text.eq_ignore_ascii_case("all") {
            return Scope::All;
        }
        Scope::Cameras(text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(CameraId::from).collect())
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::All => f.write_str("all"),
            Scope::Cameras(list) => {
                let names: Vec<&str> = list.iter().map(CameraId::as_str).collect();
                f.write_str(&names.join(","))
            }
        }
    }
}

/// One requirement: `color` must be among the `k` most common colors of `section`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub section: Section,
    pub color: String,
    pub k: usize,
}

impl Clause {
    pub fn new(section: Section, color: impl Into<String>, k: usize) -> Self {
        Self { section, color: color.into(), k }
    }

    /// Whether a section's color list (most common first) satisfies the
    /// clause. A `k` larger than the list considers the whole list.
    pub fn satisfied_by(&self, colors: &[(String, usize)]) -> bool {
        colors.iter().take(self.k).any(|(name, _)| *name == self.color)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: QueryId,
    pub clauses: Vec<Clause>,
    pub issued_at_ms: u64,
    pub scope: Scope,
}

impl Query {
    pub fn with_id(mut self, id: QueryId) -> Self {
        self.id = id;
        self
    }

    pub fn with_scope(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }

    pub fn issued_at(mut self, millis: u64) -> Self {
        self.issued_at_ms = millis;
        self
    }

    /// Largest requested count per section.
    pub fn count_for(&self, section: Section) -> Option<usize> {
        self.clauses.iter().filter(|c| c.section == section).map(|c| c.k).max()
    }

    /// Canonical text that parses back to the same clauses.
    pub fn render(&self) -> String {
        let mut used = vec![false; self.clauses.len()];
        let mut parts = Vec::new();
        for i in 0..self.clauses.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let c = &self.clauses[i];
            let mut garment = c.section.name();
            if c.section == Section::LeftLeg {
                let pair = (i + 1..self.clauses.len()).find(|&j| {
                    let o = &self.clauses[j];
                    !used[j] && o.section == Section::RightLeg && o.color == c.color && o.k == c.k
                });
                if let Some(j) = pair {
                    if (i + 1..j).all(|m| used[m]) {
                        used[j] = true;
                        garment = "pants";
                    }
                }
            }
            let count = if c.k == 1 { String::new() } else { format!("{}: ", c.k) };
            parts.push(format!("{count}{} {garment}", c.color));
        }
        parts.join(", ")
    }
}

/// Parses query text with the default garment vocabulary. The result has id
/// 0, scope `all` and issue time 0; the fog fills those in.
pub fn parse_query(text: &str, palettes: &PaletteSet) -> Result<Query, QueryError> {
    parse_query_with(text, palettes, &GarmentVocabulary::default())
}

pub fn parse_query_with(text: &str, palettes: &PaletteSet, vocabulary: &GarmentVocabulary) -> Result<Query, QueryError> {
    if text.trim().is_empty() {
        return Err(QueryError::EmptyQuery);
    }
    let mut clauses = Vec::new();
    for raw in text.split(',') {
        let raw = raw.trim();
        let (k, rest) = match raw.split_once(':') {
            Some((count, rest)) => {
                let count = count.trim();
                match count.parse::<usize>() {
                    Ok(k) if (1..=MAX_COUNT).contains(&k) => (k, rest),
                    _ => return Err(QueryError::InvalidCount(count.to_string())),
                }
            }
            None => (1, raw),
        };
        let words: Vec<String> = rest.split_whitespace().map(str::to_lowercase).collect();
        let Some((garment, color_words)) = words.split_last() else {
            return Err(QueryError::MalformedClause(raw.to_string()));
        };
        let sections = vocabulary.sections(garment).ok_or_else(|| QueryError::UnknownGarment(garment.clone()))?;
        if color_words.is_empty() {
            return Err(QueryError::MalformedClause(raw.to_string()));
        }
        let color = color_words.join("-");
        for &section in sections {
            if !palettes.for_section(section).contains(&color) {
                return Err(QueryError::UnknownColor { color, section });
            }
            clauses.push(Clause::new(section, color.clone(), k));
        }
    }
    Ok(Query { id: QueryId(0), clauses, issued_at_ms: 0, scope: Scope::All })
}

/// Returns the query's clauses when the person satisfies all of them.
/// Out-of-scope cameras never match.
pub fn match_person(query: &Query, person: &PersonDescription) -> Option<Vec<Clause>> {
    if !query.scope.contains(&person.source.camera_id) {
        return None;
    }
    let all = query
        .clauses
        .iter()
        .all(|c| person.sections.get(&c.section).is_some_and(|colors| c.satisfied_by(colors)));
    all.then(|| query.clauses.clone())
}
