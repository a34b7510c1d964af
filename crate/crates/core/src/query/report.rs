use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{match_person, Clause, CameraRegistry, Query, QueryId};
use crate::color::{describe_region, ColorCounts, PaletteSet};
use crate::frame::CameraId;
use crate::regions::{BoundingBox, PersonRef, RegionSet, Section};

/// Named colors per visible section of one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonDescription {
    pub source: PersonRef,
    pub timestamp_ms: u64,
    pub sections: BTreeMap<Section, ColorCounts>,
    pub missing: Vec<Section>,
    pub evidence: BTreeMap<Section, BoundingBox>,
}

impl PersonDescription {
    /// Clusters and names every region of `regions`. `k` gives the requested
    /// neighborhood count per section; it is clamped to the region size.
    pub fn describe(
        regions: &RegionSet,
        timestamp_ms: u64,
        k: impl Fn(Section) -> usize,
        palettes: &PaletteSet,
        seed: u64,
    ) -> Self {
        let mut sections = BTreeMap::new();
        let mut evidence = BTreeMap::new();
        let mut missing = regions.missing.clone();
        for (&section, region) in &regions.regions {
            let k = k(section).clamp(1, region.len().max(1));
            let section_seed = seed ^ mix(&regions.person, section);
            match describe_region(region, k, palettes, section_seed) {
                Ok(colors) => {
                    sections.insert(section, colors);
                    evidence.insert(section, region.bbox);
                }
                Err(_) => missing.push(section),
            }
        }
        missing.sort();
        missing.dedup();
        Self { source: regions.person.clone(), timestamp_ms, sections, missing, evidence }
    }
}

/// Stable per-region seed component so repeated runs cluster identically.
fn mix(person: &PersonRef, section: Section) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = person.camera_id.as_str().bytes().chain(person.sequence.to_le_bytes()).chain(
        (person.person_index as u64).to_le_bytes(),
    );
    for b in bytes.chain([section.index()]) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("person does not satisfy query {0}")]
    NotMatched(QueryId),
    #[error("camera `{0}` is not in the registry")]
    UnknownCamera(CameraId),
}

/// What the operator receives for one matched person. Only [`build_report`]
/// creates these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub(crate) query_id: QueryId,
    pub(crate) camera_id: CameraId,
    pub(crate) sequence: u64,
    pub(crate) timestamp_ms: u64,
    pub(crate) latitude: f64,
    pub(crate) longitude: f64,
    pub(crate) person_index: usize,
    pub(crate) matched: Vec<Clause>,
    pub(crate) evidence: Vec<(Section, BoundingBox)>,
}

impl MatchReport {
    pub fn query_id(&self) -> QueryId {
        self.query_id
    }

    pub fn camera_id(&self) -> &CameraId {
        &self.camera_id
    }

    pub fn sequence(&self) -> u64 {
        self.sequence
    }

    pub fn timestamp_ms(&self) -> u64 {
        self.timestamp_ms
    }

    pub fn geolocation(&self) -> (f64, f64) {
        (self.latitude, self.longitude)
    }

    pub fn person_index(&self) -> usize {
        self.person_index
    }

    pub fn matched(&self) -> &[Clause] {
        &self.matched
    }

    /// Bounding boxes of the sections the matched clauses refer to.
    pub fn evidence(&self) -> &[(Section, BoundingBox)] {
        &self.evidence
    }

    /// Key identifying the reported person, for set comparisons.
    pub fn person_key(&self) -> (QueryId, CameraId, u64, usize) {
        (self.query_id, self.camera_id.clone(), self.sequence, self.person_index)
    }
}

/// Runs the match and fills in the camera's location.
pub fn build_report(
    query: &Query,
    person: &PersonDescription,
    registry: &CameraRegistry,
) -> Result<MatchReport, ReportError> {
    let matched = match_person(query, person).ok_or(ReportError::NotMatched(query.id))?;
    let camera = &person.source.camera_id;
    let info = registry.get(camera).ok_or_else(|| ReportError::UnknownCamera(camera.clone()))?;
    let mut evidence: Vec<(Section, BoundingBox)> = Vec::new();
    for clause in &matched {
        if let Some(bbox) = person.evidence.get(&clause.section) {
            if !evidence.iter().any(|(s, _)| *s == clause.section) {
                evidence.push((clause.section, *bbox));
            }
        }
    }
    Ok(MatchReport {
        query_id: query.id,
        camera_id: camera.clone(),
        sequence: person.source.sequence,
        timestamp_ms: person.timestamp_ms,
        latitude: info.latitude,
        longitude: info.longitude,
        person_index: person.source.person_index,
        matched,
        evidence,
    })
}
