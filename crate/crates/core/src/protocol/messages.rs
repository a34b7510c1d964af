use std::collections::BTreeMap;

use super::codec::{Reader, Writer};
use super::ProtocolError;
use crate::frame::{CameraId, Frame, Rgb};
use crate::geometry::{Keypoint, PartKind, Point2D, Skeleton};
use crate::provider::PoseResult;
use crate::query::{Clause, MatchReport, QueryId};
use crate::regions::{BoundingBox, PersonRef, PixelRegion, RegionSet, Section};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchAction {
    /// Start (or refresh) processing for the query for `ttl_ms`.
    Activate { ttl_ms: u32 },
    Cancel,
}

/// Fog → edge: start or stop work on behalf of a query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryDispatch {
    pub query_id: QueryId,
    pub action: DispatchAction,
    /// Query text, informational only; edges never match.
    pub text: String,
}

/// A region's colors in extraction order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionBlob {
    pub section: Section,
    pub bbox: BoundingBox,
    pub pixels: Vec<Rgb>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonFeatures {
    pub person_index: u32,
    pub keypoints: Vec<Keypoint<f32>>,
    pub regions: Vec<RegionBlob>,
}

/// Edge → fog: everything the fog needs about one processed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeaturesMsg {
    pub camera_id: CameraId,
    pub sequence: u64,
    pub timestamp_ms: u64,
    pub persons: Vec<PersonFeatures>,
}

impl FrameFeaturesMsg {
    pub fn new(frame: &Frame, pose: &PoseResult<f64>, regions: &[RegionSet]) -> Self {
        let persons = pose
            .skeletons
            .iter()
            .map(|s| {
                let blobs = regions
                    .iter()
                    .find(|r| r.person.person_index == s.person_index)
                    .map(|r| {
                        r.regions
                            .values()
                            .map(|p| RegionBlob { section: p.section, bbox: p.bbox, pixels: p.pixels.clone() })
                            .collect()
                    })
                    .unwrap_or_default();
                PersonFeatures {
                    person_index: s.person_index as u32,
                    keypoints: s.cast::<f32>().keypoints.into_values().collect(),
                    regions: blobs,
                }
            })
            .collect();
        Self { camera_id: frame.camera_id.clone(), sequence: frame.sequence, timestamp_ms: frame.timestamp_ms, persons }
    }

    /// Rebuilds per-person region sets; absent sections are listed as missing.
    pub fn region_sets(&self) -> Vec<RegionSet> {
        self.persons
            .iter()
            .map(|p| {
                let person = PersonRef {
                    camera_id: self.camera_id.clone(),
                    sequence: self.sequence,
                    person_index: p.person_index as usize,
                };
                let regions: BTreeMap<Section, PixelRegion> = p
                    .regions
                    .iter()
                    .map(|b| {
                        let region = PixelRegion {
                            section: b.section,
                            pixels: b.pixels.clone(),
                            source: person.clone(),
                            bbox: b.bbox,
                        };
                        (b.section, region)
                    })
                    .collect();
                let missing = Section::ALL.into_iter().filter(|s| !regions.contains_key(s)).collect();
                RegionSet { person, regions, missing }
            })
            .collect()
    }

    pub fn skeletons(&self) -> Vec<Skeleton<f32>> {
        self.persons.iter().map(|p| Skeleton::from_keypoints(p.person_index as usize, p.keypoints.clone())).collect()
    }

    pub fn region_pixel_count(&self) -> usize {
        self.persons.iter().flat_map(|p| &p.regions).map(|r| r.pixels.len()).sum()
    }
}

/// Liveness beacon; also the first message an edge sends to identify itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heartbeat {
    pub camera_id: CameraId,
    pub sent_at_ms: u64,
    pub frames_seen: u64,
    pub frames_processed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub kind: u8,
    pub reference: u64,
}

pub(super) fn put_dispatch(w: &mut Writer, m: &QueryDispatch) {
    w.u64(m.query_id.0);
    match m.action {
        DispatchAction::Activate { ttl_ms } => {
            w.u8(1);
            w.u32(ttl_ms);
        }
        DispatchAction::Cancel => {
            w.u8(2);
            w.u32(0);
        }
    }
    w.str(&m.text);
}

pub(super) fn get_dispatch(r: &mut Reader) -> Result<QueryDispatch, ProtocolError> {
    let query_id = QueryId(r.u64()?);
    let action = r.u8()?;
    let ttl_ms = r.u32()?;
    let action = match action {
        1 => DispatchAction::Activate { ttl_ms },
        2 => DispatchAction::Cancel,
        other => return Err(ProtocolError::Malformed(format!("dispatch action {other}"))),
    };
    Ok(QueryDispatch { query_id, action, text: r.str()? })
}

fn put_bbox(w: &mut Writer, b: &BoundingBox) {
    for v in [b.min_x, b.min_y, b.max_x, b.max_y] {
        w.u32(v);
    }
}

fn get_bbox(r: &mut Reader) -> Result<BoundingBox, ProtocolError> {
    Ok(BoundingBox { min_x: r.u32()?, min_y: r.u32()?, max_x: r.u32()?, max_y: r.u32()? })
}

fn get_section(r: &mut Reader) -> Result<Section, ProtocolError> {
    let v = r.u8()?;
    Section::from_index(v).ok_or_else(|| ProtocolError::Malformed(format!("section {v}")))
}

/// Run-length encodes colors as `(u16 run, r, g, b)` records.
pub fn rle_encode(pixels: &[Rgb]) -> Vec<(u16, Rgb)> {
    let mut runs: Vec<(u16, Rgb)> = Vec::new();
    for &p in pixels {
        match runs.last_mut() {
            Some((n, c)) if *c == p && *n < u16::MAX => *n += 1,
            _ => runs.push((1, p)),
        }
    }
    runs
}

pub fn rle_decode(runs: &[(u16, Rgb)]) -> Vec<Rgb> {
    runs.iter().flat_map(|&(n, c)| std::iter::repeat_n(c, usize::from(n))).collect()
}

fn put_region(w: &mut Writer, b: &RegionBlob) {
    w.u8(b.section.index());
    put_bbox(w, &b.bbox);
    w.u32(b.pixels.len() as u32);
    let runs = rle_encode(&b.pixels);
    w.u32(runs.len() as u32);
    for (n, c) in runs {
        w.u16(n);
        w.bytes(&c);
    }
}

fn get_region(r: &mut Reader) -> Result<RegionBlob, ProtocolError> {
    let section = get_section(r)?;
    let bbox = get_bbox(r)?;
    let total = r.u32()? as usize;
    let run_count = r.u32()? as usize;
    let mut pixels = Vec::with_capacity(total.min(1 << 24));
    for _ in 0..run_count {
        let n = r.u16()?;
        let c = r.take(3)?;
        if n == 0 {
            return Err(ProtocolError::Malformed("zero-length run".into()));
        }
        pixels.extend(std::iter::repeat_n([c[0], c[1], c[2]], usize::from(n)));
        if pixels.len() > total {
            break;
        }
    }
    if pixels.len() != total {
        return Err(ProtocolError::Malformed(format!("runs hold {} pixels, header says {total}", pixels.len())));
    }
    Ok(RegionBlob { section, bbox, pixels })
}

pub(super) fn put_features(w: &mut Writer, m: &FrameFeaturesMsg) {
    w.str(m.camera_id.as_str());
    w.u64(m.sequence);
    w.u64(m.timestamp_ms);
    w.u16(m.persons.len() as u16);
    for p in &m.persons {
        w.u32(p.person_index);
        w.u8(p.keypoints.len() as u8);
        for k in &p.keypoints {
            w.u8(k.kind.index());
            w.f32(k.position.x);
            w.f32(k.position.y);
            w.f32(k.confidence);
        }
        w.u8(p.regions.len() as u8);
        for b in &p.regions {
            put_region(w, b);
        }
    }
}

pub(super) fn get_features(r: &mut Reader) -> Result<FrameFeaturesMsg, ProtocolError> {
    let camera_id = CameraId(r.str()?);
    let sequence = r.u64()?;
    let timestamp_ms = r.u64()?;
    let n = r.u16()?;
    let mut persons = Vec::with_capacity(usize::from(n));
    for _ in 0..n {
        let person_index = r.u32()?;
        let nk = r.u8()?;
        let mut keypoints = Vec::with_capacity(usize::from(nk));
        for _ in 0..nk {
            let part = r.u8()?;
            let kind = PartKind::from_index(part)
                .ok_or_else(|| ProtocolError::Malformed(format!("part {part}")))?;
            let (x, y, c) = (r.f32()?, r.f32()?, r.f32()?);
            keypoints.push(Keypoint { kind, position: Point2D::new(x, y), confidence: c });
        }
        let nr = r.u8()?;
        let mut regions = Vec::with_capacity(usize::from(nr));
        for _ in 0..nr {
            regions.push(get_region(r)?);
        }
        persons.push(PersonFeatures { person_index, keypoints, regions });
    }
    Ok(FrameFeaturesMsg { camera_id, sequence, timestamp_ms, persons })
}

pub(super) fn put_report(w: &mut Writer, m: &MatchReport) {
    w.u64(m.query_id.0);
    w.str(m.camera_id.as_str());
    w.u64(m.sequence);
    w.u64(m.timestamp_ms);
    w.f64(m.latitude);
    w.f64(m.longitude);
    w.u32(m.person_index as u32);
    w.u8(m.matched.len() as u8);
    for c in &m.matched {
        w.u8(c.section.index());
        w.str(&c.color);
        w.u16(c.k as u16);
    }
    w.u8(m.evidence.len() as u8);
    for (s, b) in &m.evidence {
        w.u8(s.index());
        put_bbox(w, b);
    }
}

pub(super) fn get_report(r: &mut Reader) -> Result<MatchReport, ProtocolError> {
    let query_id = QueryId(r.u64()?);
    let camera_id = CameraId(r.str()?);
    let sequence = r.u64()?;
    let timestamp_ms = r.u64()?;
    let latitude = r.f64()?;
    let longitude = r.f64()?;
    let person_index = r.u32()? as usize;
    let nc = r.u8()?;
    let mut matched = Vec::new();
    for _ in 0..nc {
        let section = get_section(r)?;
        let color = r.str()?;
        let k = usize::from(r.u16()?);
        matched.push(Clause { section, color, k });
    }
    let ne = r.u8()?;
    let mut evidence = Vec::new();
    for _ in 0..ne {
        let s = get_section(r)?;
        evidence.push((s, get_bbox(r)?));
    }
    Ok(MatchReport {
        query_id,
        camera_id,
        sequence,
        timestamp_ms,
        latitude,
        longitude,
        person_index,
        matched,
        evidence,
    })
}

pub(super) fn put_heartbeat(w: &mut Writer, m: &Heartbeat) {
    w.str(m.camera_id.as_str());
    w.u64(m.sent_at_ms);
    w.u64(m.frames_seen);
    w.u64(m.frames_processed);
}

pub(super) fn get_heartbeat(r: &mut Reader) -> Result<Heartbeat, ProtocolError> {
    Ok(Heartbeat { camera_id: CameraId(r.str()?), sent_at_ms: r.u64()?, frames_seen: r.u64()?, frames_processed: r.u64()? })
}
