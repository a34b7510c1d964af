//! Line-oriented pose fixture files.
//!
//! ```text
//! ivise-pose v1
//! <camera_id> <sequence> <person_index> <part_kind> <x> <y> <confidence>
//! ```
//!
//! Coordinates are native frame pixels. Blank lines are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::PoseResult;
use crate::frame::CameraId;
use crate::geometry::{Keypoint, PartKind, Skeleton};

pub const FIXTURE_HEADER: &str = "ivise-pose v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("fixture line {line}, field `{field}`: {message}")]
pub struct FixtureParseError {
    pub line: usize,
    pub field: &'static str,
    pub message: String,
}

fn err(line: usize, field: &'static str, message: impl Into<String>) -> FixtureParseError {
    FixtureParseError { line, field, message: message.into() }
}

/// Recorded pose results keyed by `(camera_id, sequence)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseFixture {
    frame_width: u32,
    frame_height: u32,
    entries: BTreeMap<(CameraId, u64), PoseResult<f64>>,
}

impl PoseFixture {
    pub fn new(frame_width: u32, frame_height: u32) -> Self {
        Self { frame_width, frame_height, entries: BTreeMap::new() }
    }

    /// Reads a fixture; every keypoint must lie inside a `frame_width` x `frame_height` frame.
    pub fn load(path: &Path, frame_width: u32, frame_height: u32) -> Result<Self, FixtureParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(0, "file", e.to_string()))?;
        Self::parse(&text, frame_width, frame_height)
    }

    pub fn parse(text: &str, frame_width: u32, frame_height: u32) -> Result<Self, FixtureParseError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.by_ref().find(|(_, l)| !l.is_empty()) {
            Some((_, FIXTURE_HEADER)) => {}
            Some((n, other)) => return Err(err(n, "header", format!("expected `{FIXTURE_HEADER}`, got `{other}`"))),
            None => return Err(err(1, "header", "empty fixture")),
        }
        let mut fixture = Self::new(frame_width, frame_height);
        let mut persons: BTreeMap<(CameraId, u64), BTreeMap<usize, Skeleton<f64>>> = BTreeMap::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(err(n, "line", format!("expected 7 fields, found {}", fields.len())));
            }
            let camera = CameraId::new(fields[0]);
            let sequence: u64 = fields[1].parse().map_err(|_| err(n, "sequence", fields[1]))?;
            let person: usize = fields[2].parse().map_err(|_| err(n, "person_index", fields[2]))?;
            let kind: PartKind = fields[3].parse().map_err(|_| err(n, "part_kind", fields[3]))?;
            let num = |i: usize, name: &'static str| -> Result<f64, FixtureParseError> {
                let v: f64 = fields[i].parse().map_err(|_| err(n, name, fields[i]))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(n, name, "not finite"))
                }
            };
            let kp = Keypoint::new(kind, num(4, "x")?, num(5, "y")?, num(6, "confidence")?);
            if !kp.confidence_valid() {
                return Err(err(n, "confidence", "outside [0, 1]"));
            }
            if !kp.position.in_bounds(frame_width, frame_height) {
                return Err(err(
                    n,
                    "x",
                    format!("keypoint ({}, {}) outside {frame_width}x{frame_height} frame", kp.position.x, kp.position.y),
                ));
            }
            let skeleton = persons
                .entry((camera, sequence))
                .or_default()
                .entry(person)
                .or_insert_with(|| Skeleton::new(person));
            if skeleton.insert(kp).is_some() {
                return Err(err(n, "part_kind", format!("duplicate {kind} for person {person}")));
            }
        }
        for ((camera, sequence), skels) in persons {
            let result = PoseResult {
                camera_id: camera.clone(),
                sequence,
                skeletons: skels.into_values().collect(),
                inference_millis: 0.0,
            };
            fixture.entries.insert((camera, sequence), result);
        }
        Ok(fixture)
    }

    pub fn insert(&mut self, result: PoseResult<f64>) {
        self.entries.insert((result.camera_id.clone(), result.sequence), result);
    }

    pub fn get(&self, camera: &CameraId, sequence: u64) -> Option<&PoseResult<f64>> {
        self.entries.get(&(camera.clone(), sequence))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frame_size(&self) -> (u32, u32) {
        (self.frame_width, self.frame_height)
    }

    /// Canonical text form: entries and keypoints in sorted order.
    pub fn render(&self) -> String {
        let mut out = String::from(FIXTURE_HEADER);
        out.push('\n');
        for ((camera, sequence), result) in &self.entries {
            for skel in &result.skeletons {
                for kp in skel.keypoints.values() {
                    let _ = writeln!(
                        out,
                        "{camera} {sequence} {} {} {} {} {}",
                        skel.person_index, kp.kind, kp.position.x, kp.position.y, kp.confidence
                    );
                }
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}
